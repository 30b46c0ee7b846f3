"""Combinatorial group testing: pooling designs, decoders and test count tables."""

#: Semantic versioning number. The three dotted numbers are:
#: *   Major: breaking API changes, significant feature additions.
#: *   Minor: standard feature additions and improvements. No breaking changes.
#: *   Micro: small bug fixes.
__version__ = "0.1.0"

# Make commonly used symbols importable from form_group_testing.
from .errors import (
    GroupTestingError,
    GuardExceededError,
    InputError,
    NoSolutionError,
    ProtocolViolationError,
)
from .matrix import (
    Candidates,
    DefectiveSet,
    Identified,
    OutcomeVector,
    Overflow,
    TestMatrix,
    decode_disjunct,
    run_tests,
)
from .otel_value import EventAttrKey, EventAttrValue, Method, SpanName
