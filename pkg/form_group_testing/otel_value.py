"""Common string values for methods, spans and OpenTelemetry attributes.

Plain strings are used because:
*   Enums cannot be subclassed to add more values. A downstream project adding its
    own design tag (or its own span names) can subclass these classes.
*   Method tags are written verbatim into matrix files and table headers, so the
    string is the canonical value anyway.
"""


class Method:
    """Tags of the test matrix constructions, as written in CGT1 files."""

    CRS = "crs"
    RW = "rw"
    D2 = "d2"
    D3 = "d3"
    CUSTOM = "custom"

    ALL = (CRS, RW, D2, D3, CUSTOM)


class TableMethod:
    """Column tags of the test count comparison tables."""

    D2 = "d2"
    D3 = "d3"
    CRS = "crs"
    CRS_BT = "crs-bt"
    RW = "rw"
    MR = "mr"
    KS = "ks"
    HS = "hs"
    DH3 = "dh3"

    ALL = (D2, D3, CRS_BT, CRS, RW, MR, KS, HS, DH3)


class SpanName:
    """Names of spans which may be referenced in multiple places.

    These might be referenced in application code, or in external dashboards.
    """

    #: The top-level span of a CLI invocation.
    ROOT = "cgt"
    CONSTRUCT_CRS = "construct.crs"
    CONSTRUCT_RW = "construct.rw"
    CONSTRUCT_D2 = "construct.d2"
    CONSTRUCT_D3 = "construct.d3"
    PLAN_SEARCH = "crs.optimize_exponents"
    DECODE_DISJUNCT = "decode.disjunct"
    DECODE_SEPARABLE = "decode.separable"
    DECODE_D2 = "decode.d2"
    DECODE_D3 = "decode.d3"
    DECODE_STAGE1 = "decode.stage1"
    VERIFY_DISJUNCT = "verify.disjunct"
    VERIFY_SEPARABLE = "verify.separable"
    VERIFY_RESOLVABLE = "verify.resolvable"
    TWO_STAGE = "two_stage.identify"
    TRIALS = "two_stage.trials"
    COMPARE = "compare.table"


class EventAttrKey:
    """Event and span attribute keys which may be referenced in external queries."""

    #: Types of events.
    TYPE = "type"
    #: The name field for a duration event. This cannot simply be "name" which is
    #: reserved for the actual event name.
    DURATION_NAME = "duration_name"
    #: The elapsed time value (in seconds) represented by a duration event.
    DURATION_SECONDS = "duration_s"

    COMMAND = "cgt.command"
    METHOD = "cgt.method"
    N = "cgt.n"
    D = "cgt.d"
    T = "cgt.t"
    K = "cgt.k"
    Q = "cgt.q"
    SEED = "cgt.seed"
    PLAN = "cgt.plan"
    COST = "cgt.cost"
    RESULT = "cgt.result"
    ITEMS = "cgt.items"
    PROBES = "cgt.probes"
    SUBSETS = "cgt.subsets"
    CANDIDATES = "cgt.candidates"
    COUNTEREXAMPLE = "cgt.counterexample"
    NODES = "cgt.search_nodes"


class EventAttrValue:
    """Event attribute values which may be referenced / filtered by in external queries."""

    #: An event type capturing the time taken by some portion of the work.
    DURATION = "duration"
    #: An event type for log messages.
    LOG_MESSAGE = "log_message"
    PLAN_SELECTED = "plan_selected"
    PLAN_OPTIMIZED = "plan_optimized"
    DECODE_RESULT = "decode_result"
    STAGE1_OVERFLOW = "stage1_overflow"
    VERIFY_COUNTEREXAMPLE = "verify_counterexample"
