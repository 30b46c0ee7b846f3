"""Pytest fixtures for tests of this package and of projects building on it."""
from unittest import mock

import opentelemetry
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import SimpleSpanProcessor
from opentelemetry.sdk.trace.export.in_memory_span_exporter import InMemorySpanExporter
from opentelemetry.trace.span import NonRecordingSpan, SpanContext
import pytest

_exporter = None


@pytest.fixture(autouse=True)
def mock_get_current_span(request):
    """Provide a standin current span for unit tests.

    Since there is no active OpenTelemetry configuration in tests, there will never
    be a real span with a trace/span ID otherwise.

    Tests that read recorded spans (through the span_exporter fixture) or mark
    themselves with @pytest.mark.no_mock_get_current_span get the real lookup.
    """
    if (
        "no_mock_get_current_span" in request.keywords
        or "span_exporter" in request.fixturenames
    ):
        yield
    else:
        # A real SpanContext, so SDK tracers accept it as a parent once the
        # span_exporter fixture has installed a global provider.
        span = NonRecordingSpan(SpanContext(trace_id=11, span_id=22, is_remote=False))
        with mock.patch.object(
            opentelemetry.trace, "get_current_span", return_value=span
        ):
            yield


@pytest.fixture
def span_exporter():
    """Records finished spans in memory, for asserting on spans and their events.

    The global tracer provider can only be set once per interpreter, so it is
    installed on first use and the exporter is cleared around every test.
    """
    global _exporter
    if _exporter is None:
        _exporter = InMemorySpanExporter()
        provider = TracerProvider()
        provider.add_span_processor(SimpleSpanProcessor(_exporter))
        opentelemetry.trace.set_tracer_provider(provider)
    _exporter.clear()
    yield _exporter
    _exporter.clear()
