import logging
import sys
import traceback

import opentelemetry
from opentelemetry.trace import Status, StatusCode
from opentelemetry.semconv.trace import SpanAttributes

from form_group_testing.context_aware import _filter_attributes, ctx
from form_group_testing.otel_value import EventAttrKey, EventAttrValue

#: The logger all package modules log under (module loggers are its children).
PACKAGE_LOGGER = "form_group_testing"

_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)
_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class OtelSpanEventHandler(logging.Handler):
    """Attach log messages as events to the current span. Noop if no current span.

    Also sets the span error status if the log is ERROR or above.

    Following Honeycomb advice:
    https://www.honeycomb.io/blog/uniting-tracing-logs-open-telemetry-span-events/
    """

    def emit(self, record: logging.LogRecord) -> None:
        span = opentelemetry.trace.get_current_span()
        # Without a configured tracer provider the current span is non-recording,
        # which is the normal case for library use and for most CLI runs.
        if not (span and span.is_recording()):
            return

        attributes = {
            EventAttrKey.TYPE: EventAttrValue.LOG_MESSAGE,
            "logger.name": record.name,
            "level": record.levelname,
            SpanAttributes.CODE_FILEPATH: record.pathname,
            SpanAttributes.CODE_LINENO: record.lineno,
            SpanAttributes.CODE_NAMESPACE: record.module,
            SpanAttributes.CODE_FUNCTION: record.funcName,
            SpanAttributes.THREAD_ID: record.thread,
            "process.pid": record.process,
        }

        if record.exc_info is not None:
            exc_type, exc_value, tb = record.exc_info
            # Record similar attributes as span.record_exception, but don't use it
            # to avoid having two events.
            attributes.update(
                {
                    SpanAttributes.EXCEPTION_TYPE: exc_value.__class__.__name__,
                    SpanAttributes.EXCEPTION_MESSAGE: str(exc_value),
                    SpanAttributes.EXCEPTION_STACKTRACE: "".join(
                        traceback.format_exception(*record.exc_info)
                    ),
                    SpanAttributes.EXCEPTION_ESCAPED: False,
                }
            )

        if record.levelno >= logging.ERROR:
            # Only the latest error message is kept as the span's status_message,
            # but every error log still becomes an event.
            span.set_status(Status(StatusCode.ERROR, record.getMessage()))
            attributes["error"] = True

        span.add_event(
            # Use the log message as the event name, for UI visibility.
            record.getMessage(),
            attributes=_filter_attributes({**attributes, **ctx.current_ctx}),
        )


def configure_logging(verbosity: int = 0, stream=None) -> logging.Logger:
    """Send package logs to stderr and to the current span.

    :param verbosity: 0 for WARNING, 1 for INFO, 2 or more for DEBUG.
    :param stream: Where to write formatted records, sys.stderr by default. Command
        output goes to stdout, so logs never mix into tables or matrix files.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(_LEVELS[min(max(verbosity, 0), len(_LEVELS) - 1)])
    # Configure idempotently, so repeated CLI invocations in one interpreter (tests)
    # don't stack handlers.
    for handler in list(logger.handlers):
        if getattr(handler, "_cgt_handler", False):
            logger.removeHandler(handler)

    stream_handler = logging.StreamHandler(stream or sys.stderr)
    stream_handler.setFormatter(logging.Formatter(_FORMAT))
    span_handler = OtelSpanEventHandler()
    for handler in (stream_handler, span_handler):
        handler._cgt_handler = True
        logger.addHandler(handler)
    logger.propagate = False
    return logger
