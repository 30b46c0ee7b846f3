"""OpenTelemetry tracing setup for the command line tool.

Example usage for Honeycomb:

tracing_setup.configure(
    "cgt",
    {"x-honeycomb-team": "<API key for desired environment>"},
    otlp_endpoint="https://api.honeycomb.io",
)

or, to read spans locally:

tracing_setup.configure("cgt", console=True)
"""
import os
import sys
from typing import Dict, Optional

import opentelemetry
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import SpanLimits, TracerProvider
from opentelemetry.sdk.trace.export import ConsoleSpanExporter, SimpleSpanProcessor


def configure(
    service_name: str,
    otlp_headers: Optional[Dict[str, str]] = None,
    otlp_endpoint: Optional[str] = None,
    console: bool = False,
) -> Optional[TracerProvider]:
    """Set up a trace provider and processor, so tracing data gets exported.

    Does nothing (and returns None) unless an OTLP endpoint is given or console
    export is requested; the toolkit then runs with the no-op tracer.

    This should be called once before program execution within each Python interpreter.
    """
    if not otlp_endpoint and not console:
        return None

    # Upload all traces (do not downsample). These must be env vars, and a user's
    # explicit settings win.
    for key, default_value in (
        ("OTEL_TRACES_SAMPLER", "traceidratio"),
        ("OTEL_TRACES_SAMPLER_ARG", "1.0"),
        ("OTEL_RESOURCE_ATTRIBUTES", "SampleRate=1"),
    ):
        if key not in os.environ:
            os.environ[key] = default_value

    trace_provider = TracerProvider(
        # The name of what we're tracing; in Honeycomb, the dataset.
        resource=Resource(
            attributes={
                SERVICE_NAME: service_name,
            }
        ),
        # Log records become span events, and a long verification can log many.
        # https://opentelemetry-python.readthedocs.io/en/latest/sdk/trace.html#opentelemetry.sdk.trace.SpanLimits
        span_limits=SpanLimits(
            max_events=SpanLimits.UNSET,  # no limit (v. None which gets the default)
        ),
    )
    # SimpleSpanProcessor exports synchronously, so a short CLI run never exits
    # with spans still queued, and it is safe with the trial worker processes.
    if otlp_endpoint:
        exporter = OTLPSpanExporter(endpoint=otlp_endpoint, headers=otlp_headers)
    else:
        # stderr, since stdout carries the command's output.
        exporter = ConsoleSpanExporter(out=sys.stderr)
    trace_provider.add_span_processor(SimpleSpanProcessor(exporter))
    opentelemetry.trace.set_tracer_provider(trace_provider)
    return trace_provider
