from collections import namedtuple
from contextlib import contextmanager
import logging
import time

from form_group_testing.context_aware import ContextAwareTracer

TimingInfo = namedtuple("TimingInfo", ["start_s", "end_s", "dt_s"])

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)


class Stopwatch:
    """Elapsed time of a block. `info` is None until the block exits."""

    def __init__(self, start_s: float):
        self.start_s = start_s
        self.info = None


@contextmanager
def timed(duration_name: str, seconds_fn=time.perf_counter):
    """Times a block and records it as a duration event on the current span.

    Usage:
        with timed("compare.table") as watch:
            rows = comparison_table(...)
        watch.info.dt_s

    :return: A Stopwatch whose info (start_s, end_s, dt_s) is set on exit, also
        when the block raises.
    """
    watch = Stopwatch(seconds_fn())
    try:
        yield watch
    finally:
        end_s = seconds_fn()
        watch.info = TimingInfo(watch.start_s, end_s, end_s - watch.start_s)
        _tracer.add_duration_event(duration_name, watch.info.dt_s)
        _log.info("%s took %.3fs", duration_name, watch.info.dt_s)
