from unittest.mock import MagicMock, patch

import numpy as np
import opentelemetry
from opentelemetry.trace.span import Span

from form_group_testing.context_aware import ContextAwareTracer, _filter_attributes, ctx
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, SpanName


class _TestAttrValue(EventAttrValue):
    UNITTEST = "unit_test"


@patch.object(opentelemetry.trace, "get_current_span")
def test_add_duration_event(mock_get_current_span):
    mock_span = MagicMock(spec=Span)
    mock_span.is_recording.return_value = True
    mock_get_current_span.return_value = mock_span
    dt = 12.5

    tracer = ContextAwareTracer("unittest")
    tracer.add_duration_event(_TestAttrValue.UNITTEST, dt, {"test": True})

    mock_span.add_event.assert_called_once()
    mock_call = mock_span.add_event.call_args_list[0]
    assert mock_call.args[0] == _TestAttrValue.UNITTEST
    event_attrs = mock_call.kwargs.get("attributes")
    assert event_attrs.get(EventAttrKey.TYPE) == EventAttrValue.DURATION
    assert event_attrs.get(EventAttrKey.DURATION_SECONDS) == dt
    assert event_attrs.get(EventAttrKey.DURATION_NAME) == _TestAttrValue.UNITTEST
    assert event_attrs.get("test") == True


@patch.object(opentelemetry.trace, "get_current_span")
def test_events_skip_non_recording_spans(mock_get_current_span):
    mock_span = MagicMock(spec=Span)
    mock_span.is_recording.return_value = False
    mock_get_current_span.return_value = mock_span

    ContextAwareTracer("unittest").add_event(_TestAttrValue.UNITTEST)

    mock_span.add_event.assert_not_called()


def test_context():
    assert ctx.get("a") is None

    with ctx.set({"a": 1}), ctx.set({"b": 2}):
        assert ctx.get("a") == 1
        assert ctx.get("b") == 2

        with ctx.set({"a": 2}):
            assert ctx.get("a") == 2
            assert ctx.get("b") == 2

        assert ctx.get("a") == 1
        assert ctx.get("b") == 2

    assert ctx.get("a") is None
    assert ctx.get("b") is None


def test_filter_attributes_converts_types():
    filtered = _filter_attributes(
        {
            EventAttrKey.N: np.int64(100),
            EventAttrKey.PLAN: None,
            EventAttrKey.COST: 10**60,
            EventAttrKey.ITEMS: {3, 1},
            "flag": True,
        }
    )
    assert filtered == {
        EventAttrKey.N: 100,
        EventAttrKey.COST: str(10**60),
        EventAttrKey.ITEMS: [1, 3],
        "flag": True,
    }
    assert type(filtered[EventAttrKey.N]) is int


def test_span_attributes_include_context(span_exporter):
    tracer = ContextAwareTracer("unittest")
    with ctx.set({EventAttrKey.N: 100}):
        with tracer.start_as_current_span(SpanName.COMPARE, {EventAttrKey.D: 2}):
            tracer.add_event(_TestAttrValue.UNITTEST, {EventAttrKey.COST: 36})

    (span,) = span_exporter.get_finished_spans()
    assert span.name == SpanName.COMPARE
    assert span.attributes[EventAttrKey.N] == 100
    assert span.attributes[EventAttrKey.D] == 2
    (event,) = span.events
    assert event.name == _TestAttrValue.UNITTEST
    assert event.attributes[EventAttrKey.TYPE] == _TestAttrValue.UNITTEST
    assert event.attributes[EventAttrKey.COST] == 36
    assert event.attributes[EventAttrKey.D] == 2


def test_traced_defaults_to_function_name(span_exporter):
    tracer = ContextAwareTracer("unittest")

    @tracer.traced
    def helper():
        return 7

    @tracer.traced(SpanName.DECODE_D2)
    def named():
        return 8

    assert helper() == 7
    assert named() == 8
    assert [s.name for s in span_exporter.get_finished_spans()] == [
        "helper",
        SpanName.DECODE_D2,
    ]


def test_spans_start_under_stand_in_span_with_provider_installed(request):
    # The SDK provider is global, so tests after any span_exporter test see it.
    exporter = request.getfixturevalue("span_exporter")
    tracer = ContextAwareTracer("unittest")
    with tracer.start_as_current_span(SpanName.DECODE_D2) as span:
        pass
    assert span.get_span_context().trace_id == 11
    # The stand-in parent is unsampled, so the child is not exported.
    assert exporter.get_finished_spans() == ()
