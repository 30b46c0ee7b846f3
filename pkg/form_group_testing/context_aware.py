"""OpenTelemetry tracing with context-scoped attributes.

Usage:

_tracer = ContextAwareTracer(__name__)

with ctx.set({EventAttrKey.METHOD: Method.CRS, EventAttrKey.N: n}):
    with _tracer.start_as_current_span(SpanName.CONSTRUCT_CRS):
        # This event has the method and n attributes, same as the parent span.
        _tracer.add_event(EventAttrValue.PLAN_SELECTED, {EventAttrKey.COST: 41})

        # Values found after opening the span can be added to it too. This adds
        # the plan as an attribute of the current span since update_current_span=True.
        with ctx.set({EventAttrKey.PLAN: "2,3,5,7,11,13"}, update_current_span=True):
            # Any further spans/events/logs in helper() have all the attributes.
            helper()

When no tracer provider is configured (the default for library use and tests)
spans are non-recording and every call here is a cheap no-op.
"""
from contextlib import contextmanager
import functools
import platform
import threading
from typing import Any, Dict, Optional

import numpy as np
import opentelemetry
from opentelemetry.trace import Span

from form_group_testing.otel_value import EventAttrKey, EventAttrValue

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


class _ObservabilityContext:
    """Information about the execution context, for each thread.

    This class is thread-safe and meant to be used by sharing a single instance of it
    with the whole application.

    Use the global ctx object created below.
    """

    #: Contains the isolated stacks for each thread.
    #: Each dict in a list is a new context on a stack, extending the previous context:
    #: Thread 1: [{}]
    #: Thread 2: [{}, {'cgt.method': 'crs'}, {'cgt.method': 'crs', 'cgt.n': 100}]
    _ctx = threading.local()

    @property
    def _stack(self):
        """Lazily create and return the stack for the current thread.

        This makes sure that if the ctx is created in one thread but then used from
        another a per-thread stack is still created.
        """
        if not hasattr(self._ctx, "stack"):
            # Add these attrs globally.
            self._ctx.stack = [
                {
                    "host.name": platform.node(),
                    "os.type": platform.system().lower(),
                },
            ]
        return self._ctx.stack

    @property
    def current_ctx(self) -> dict:
        return self._stack[-1]

    @contextmanager
    def set(
        self,
        attributes: Dict[str, Any],
        update_current_span=False,
    ):
        """
        Create a new context valid for a block of code and add keys to it.

        After the block of code has ended, the previous context is restored.
        Because manually managing start and end of context is tedious, this method is
        only meant to be used with a `with` statement.

        :param attributes: Key-value pairs to add to the context.
        """
        filtered = _filter_attributes(attributes)
        self._stack.append({**self.current_ctx, **filtered})
        if update_current_span:
            opentelemetry.trace.get_current_span().set_attributes(filtered)
        try:
            yield
        finally:
            self._stack.pop()

    def get(self, *args, **kwargs):
        """
        Get the value for a key from the current context.
        """
        return self.current_ctx.get(*args, **kwargs)


#: Object to use throughout the package to attach context to logs and traces.
#:
#: Usage:
#:      with ctx.set({EventAttrKey.N: n}):
#:          # cgt.n is added to span events generated from this log.
#:          _log.info("Building matrix.")
ctx = _ObservabilityContext()


def _convert_types(v: Any) -> Any:
    """Converts values to types OpenTelemetry attributes accept.

    numpy scalars become Python numbers, integers beyond 64 bits (n^d, plan
    products) become decimal strings, and sets/tuples of ints become sorted lists.
    """
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, bool):
        return v
    if isinstance(v, int) and not _INT64_MIN <= v <= _INT64_MAX:
        return str(v)
    if isinstance(v, (set, frozenset)):
        return [_convert_types(x) for x in sorted(v)]
    if isinstance(v, (tuple, list)):
        return [_convert_types(x) for x in v]
    return v


def _filter_attributes(d: Dict) -> Dict:
    """Pre-process span/event attributes to convert complex types and remove None values.

    Spans warn if the attribute value is None, so filter None values out. This
    filtering is not strictly necessary for span events, which accept None values.
    """
    filtered = {}
    for k, v in d.items():
        if v is None:
            continue
        filtered[_convert_types(k)] = _convert_types(v)
    return filtered


class ContextAwareTracer:
    """Main entry point for starting spans and adding events. See usage in module doc.

    Wrapper for OpenTelemetry interfaces with helpers that automatically pick up
    ctx.current_ctx and/or update it.
    """

    def __init__(self, library_name):
        self._tracer = opentelemetry.trace.get_tracer(library_name)

    def _recording_span(self) -> Optional[Span]:
        span = opentelemetry.trace.get_current_span()
        if span is None or not span.is_recording():
            return None
        return span

    def add_duration_event(
        self,
        duration_name: str,
        dt: float,
        attributes: Optional[Dict] = None,
    ) -> None:
        """Records a duration value (duration_s) on the current span.

        :param duration_name: The value to use for the duration_name attribute on the event.
            Queries are expected to reference this value.
        :param attributes: Additional event attributes (merged with ctx.current_ctx).
        """
        if dt is None:
            raise ValueError(f"Bad dt value for add_duration_event: {dt}.")
        span = self._recording_span()
        if span is None:
            return
        event_attrs = {
            **ctx.current_ctx,
            EventAttrKey.TYPE: EventAttrValue.DURATION,
            EventAttrKey.DURATION_NAME: duration_name,
            EventAttrKey.DURATION_SECONDS: dt,
            **(attributes or {}),
        }
        # Use the duration name as the event name too, for UI visibility.
        span.add_event(duration_name, attributes=_filter_attributes(event_attrs))

    def add_event(self, event_type: str, attributes: Optional[Dict] = None) -> None:
        """Records an event on the current span.

        :param event_type: Used as the event name, as well as the "type" attribute.
        :param attributes: Additional event attributes (merged with ctx.current_ctx).
        """
        span = self._recording_span()
        if span is None:
            return
        event_attrs = {
            **ctx.current_ctx,
            EventAttrKey.TYPE: event_type,
            **(attributes or {}),
        }
        span.add_event(
            _convert_types(event_type),
            attributes=_filter_attributes(event_attrs),
        )

    def traced(self, name_or_fn=None):
        """Decorator to trace a function.

        Usage:
            _tracer = ContextAwareTracer(..)

            @_tracer.traced
            def my_fn(arg):
                pass

            @_tracer.traced(SpanName.DECODE_D2)
            def decode_d2(outcome, params):
                pass

        This is similar to OTel's builtin decorator, but defaults the span name to
        the function name and integrates with context.
        """

        def decorate(wrapped, span_name):
            @functools.wraps(wrapped)
            def wrapper(*args, **kwargs):
                with self.start_as_current_span(span_name or wrapped.__name__):
                    return wrapped(*args, **kwargs)

            return wrapper

        if callable(name_or_fn):
            return decorate(name_or_fn, None)
        return lambda wrapped: decorate(wrapped, name_or_fn)

    @contextmanager
    def start_as_current_span(
        self,
        name: str,
        attributes: Optional[Dict[str, Any]] = None,
        **kwargs,
    ):
        """Starts a span with the given name, merging ctx.current_ctx with attributes."""
        attributes = attributes or {}
        span_attrs = {**ctx.current_ctx, **attributes}
        with ctx.set(attributes), self._tracer.start_as_current_span(
            _convert_types(name),
            attributes=_filter_attributes(span_attrs),
            **kwargs,
        ) as span:
            yield span
