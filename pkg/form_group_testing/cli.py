"""The `cgt` command line tool.

    cgt construct --method crs --n 100 --d 2 --backtrack --out m.cgt
    cgt simulate m.cgt --defectives 4,17 --outcomes o.txt
    cgt decode m.cgt o.txt
    cgt verify m.cgt --disjunct 2
    cgt two-stage --n 256 --d 4 --seed 1
    cgt compare --d 2 --n 15,100,1e30 --format csv --fixture

Exit codes: 0 success, 1 a logical failure (decode mismatch, property FAIL,
fixture mismatch, protocol violation), 2 a usage or input error.

Command output goes to stdout and is identical across runs with the same
arguments; logs go to stderr.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

from form_group_testing import __version__, tracing_setup
from form_group_testing.binary_pairs import build_d3_matrix, d3_params_for, decode_d3
from form_group_testing.config import Settings
from form_group_testing.context_aware import ContextAwareTracer
from form_group_testing.crs import (
    backtrack_plan,
    build_crs_matrix,
    describe_plan,
    select_prime_plan,
)
from form_group_testing.errors import (
    GroupTestingError,
    ProtocolViolationError,
)
from form_group_testing.log import configure_logging
from form_group_testing.matrix import (
    Candidates,
    DecodeResult,
    DefectiveSet,
    Identified,
    OutcomeVector,
    TestMatrix,
    decode_disjunct,
    describe_result,
    ones_indices,
    run_tests,
    sampling_rate,
    survivors,
)
from form_group_testing.matrix_file import (
    dumps_matrix,
    dumps_outcome,
    read_matrix,
    read_outcome,
    write_matrix,
    write_outcome,
)
from form_group_testing.otel_value import EventAttrKey, Method, SpanName, TableMethod
from form_group_testing.rake_winnow import (
    HiddenSetOracle,
    RWParams,
    TrialMode,
    build_rw_matrix,
    decode_stage1,
    identify_with_retry,
    random_hidden_set,
    simulate_trials,
)
from form_group_testing.reference_bounds import (
    comparison_table,
    default_methods,
    diff_fixtures,
    format_count,
    hs_crossover_exponent,
    load_fixtures,
    parse_count,
    render_csv,
    render_text,
)
from form_group_testing.ternary import build_d2_matrix, d2_params_for, decode_d2
from form_group_testing.verify import (
    decode_separable,
    find_disjunct_violation,
    find_resolvability_violation,
    find_separability_violation,
)

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(GroupTestingError):
    """A flag combination that argparse alone cannot reject."""


def _item_list(text: str) -> DefectiveSet:
    items = [s.strip() for s in text.split(",") if s.strip()]
    return DefectiveSet(tuple(int(s) for s in items))


def _count_list(text: str) -> List[int]:
    return [parse_count(s) for s in text.split(",") if s.strip()]


def _method_list(text: str) -> List[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


# construct


def _construct(args) -> TestMatrix:
    method = args.method
    if method != Method.RW and (args.k is not None or args.tparam is not None):
        raise UsageError("--k and --tparam only apply to --method rw.")
    if method != Method.CRS and (args.backtrack or args.maxpow is not None):
        raise UsageError("--backtrack and --maxpow only apply to --method crs.")
    if method in (Method.CRS, Method.RW) and (args.n is None or args.d is None):
        raise UsageError(f"--method {method} needs --n and --d.")

    if method == Method.CRS:
        if args.maxpow is not None and not args.backtrack:
            raise UsageError("--maxpow needs --backtrack.")
        if args.backtrack:
            plan = backtrack_plan(args.n, args.d, args.maxpow)
        else:
            plan = select_prime_plan(args.n, args.d)
        return build_crs_matrix(args.n, plan, args.d)
    if method == Method.RW:
        if args.tparam is None:
            params = RWParams.for_instance(args.n, args.d, args.k, args.seed)
        else:
            k = args.d if args.k is None else args.k
            params = RWParams(args.n, args.d, k, args.tparam, args.seed)
        return build_rw_matrix(params)

    capacity = 2 if method == Method.D2 else 3
    if args.d is not None and args.d != capacity:
        raise UsageError(f"--method {method} handles exactly d={capacity}.")
    radix, params_for, build = (
        (3, d2_params_for, build_d2_matrix)
        if method == Method.D2
        else (2, d3_params_for, build_d3_matrix)
    )
    if args.q is None:
        if args.n is None:
            raise UsageError(f"--method {method} needs --n or --q.")
        params = params_for(args.n)
        return build(params.q, params.effective_n)
    return build(args.q, args.n if args.n is not None else radix**args.q)


def cmd_construct(args) -> int:
    m = _construct(args)
    summary = [
        f"method={m.method} n={m.n} t={m.t} d={m.d} sampling_rate={sampling_rate(m)}"
    ]
    if m.method == Method.CRS:
        summary.append(describe_plan(m.params))
    if args.out:
        write_matrix(m, args.out)
        print("\n".join(summary))
    else:
        sys.stdout.write(dumps_matrix(m))
        print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


# decode / simulate


def decode_matrix_outcome(
    m: TestMatrix, o: OutcomeVector, separable: bool = False, force: bool = False
) -> DecodeResult:
    """Decodes with the decoder that matches how the matrix was built."""
    if separable:
        return decode_separable(m, o, m.d, force)
    if m.method == Method.D2:
        return decode_d2(o, m.params)
    if m.method == Method.D3:
        return decode_d3(o, m.params)
    if m.method == Method.RW:
        return decode_stage1(m, o)
    return decode_disjunct(m, o, m.d)


def _dump_survivors(m, o) -> None:
    print("survivors=" + ",".join(str(i) for i in ones_indices(survivors(m, o))))


def cmd_decode(args) -> int:
    m = read_matrix(args.matrix)
    o = read_outcome(args.outcomes)
    result = decode_matrix_outcome(m, o, args.separable, args.force)
    print(describe_result(result))
    if args.dump_survivors:
        _dump_survivors(m, o)
    return EXIT_OK if isinstance(result, (Identified, Candidates)) else EXIT_FAIL


def _recovered(result: DecodeResult, hidden: DefectiveSet) -> bool:
    if isinstance(result, Identified):
        return result.items == hidden
    if isinstance(result, Candidates):
        return all(i in result.items for i in hidden)
    return False


def cmd_simulate(args) -> int:
    m = read_matrix(args.matrix)
    if args.trials is not None:
        if args.random is None:
            raise UsageError("--trials needs --random COUNT.")
        misses = 0
        for seed in range(args.seed, args.seed + args.trials):
            hidden = random_hidden_set(m.n, args.random, seed)
            result = decode_matrix_outcome(m, run_tests(m, hidden))
            if not _recovered(result, hidden):
                misses += 1
                _log.info("Seed %d: %s decoded as %s", seed, hidden, describe_result(result))
        print(f"trials={args.trials} recovered={args.trials - misses} missed={misses}")
        return EXIT_OK if misses == 0 else EXIT_FAIL

    if args.defectives is not None:
        hidden = args.defectives
    elif args.random is not None:
        hidden = random_hidden_set(m.n, args.random, args.seed)
    else:
        raise UsageError("Give --defectives or --random.")
    if len(hidden) > m.d:
        _log.warning(
            "Simulating %d defectives on a matrix designed for d=%d", len(hidden), m.d
        )
    o = run_tests(m, hidden)
    if args.outcomes:
        write_outcome(o, args.outcomes)
    else:
        sys.stdout.write(dumps_outcome(o))
    result = decode_matrix_outcome(m, o)
    print(f"defectives={hidden}")
    print(describe_result(result))
    if args.dump_survivors:
        _dump_survivors(m, o)
    return EXIT_OK if _recovered(result, hidden) else EXIT_FAIL


# verify


def cmd_verify(args) -> int:
    m = read_matrix(args.matrix)
    if args.disjunct is not None:
        label = f"{args.disjunct}-disjunct"
        found = find_disjunct_violation(m, args.disjunct, args.force)
    elif args.separable is not None:
        label = f"{args.separable}-separable"
        found = find_separability_violation(m, args.separable, args.force)
    else:
        d, k = args.resolvable
        label = f"({d},{k})-resolvable"
        found = find_resolvability_violation(m, d, k, args.force)
    if found is None:
        print(f"PASS {label}")
        return EXIT_OK
    first, second = found
    print(f"FAIL {label}: {list(first)} against {second}")
    return EXIT_FAIL


# two-stage


def cmd_two_stage(args) -> int:
    k = args.d if args.k is None else args.k
    if args.trials is not None:
        if args.hidden is not None:
            mode, hidden = TrialMode.FIXED, args.hidden
        else:
            mode, hidden = TrialMode.RANDOM, None
        summary = simulate_trials(
            args.n,
            args.d,
            range(args.seed, args.seed + args.trials),
            k=k,
            mode=mode,
            hidden=hidden,
        )
        print(
            f"trials={summary.trials} failures={summary.failures} exact={summary.exact}"
            f" false_positives={summary.false_positives}"
        )
        return EXIT_OK if summary.exact + summary.failures == summary.trials else EXIT_FAIL

    params = RWParams.for_instance(args.n, args.d, k, args.seed)
    hidden = args.hidden
    if hidden is None:
        hidden = random_hidden_set(args.n, args.d, args.seed)
    hidden.check_within(args.n)
    transcripts = identify_with_retry(params, HiddenSetOracle(hidden), args.retry)
    for transcript in transcripts:
        print(
            f"seed={transcript.seed} stage1_tests={transcript.stage1_tests}"
            f" candidates={len(transcript.stage1_candidates)}"
            f" stage2_tests={transcript.stage2_tests} final={transcript.final}"
            f" failed={str(transcript.failed).lower()}"
        )
    print(f"hidden={hidden}")
    last = transcripts[-1]
    return EXIT_OK if not last.failed and last.final == hidden else EXIT_FAIL


# compare


def cmd_compare(args) -> int:
    fixtures = load_fixtures().get(args.d, {}) if args.fixture or args.n is None else {}
    if args.fixture and not fixtures:
        raise UsageError(f"No stored tables for d={args.d}.")
    n_list = args.n if args.n is not None else sorted(fixtures)
    if not n_list:
        raise UsageError(f"Give --n; no stored tables for d={args.d}.")
    methods = args.methods or default_methods(args.d)
    rows = comparison_table(args.d, n_list, methods)
    render = render_csv if args.format == "csv" else render_text
    sys.stdout.write(render(rows, methods))
    if args.crossover:
        k = hs_crossover_exponent(args.d)
        print(f"crossover: crs <= hs up to n = {'none' if k is None else format_count(10**k)}")
    if args.fixture:
        mismatches = diff_fixtures(rows, fixtures)
        for mismatch in mismatches:
            print(f"MISMATCH {mismatch}", file=sys.stderr)
        return EXIT_FAIL if mismatches else EXIT_OK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgt", description="Combinatorial group testing designs and decoders."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO logs, -vv for DEBUG."
    )
    parser.add_argument(
        "--trace-console", action="store_true", help="Print spans to stderr."
    )
    parser.add_argument(
        "--otlp-endpoint",
        help="Export spans over OTLP/gRPC (default: $CGT_OTLP_ENDPOINT).",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    construct = commands.add_parser("construct", help="Build a test matrix.")
    construct.add_argument(
        "--method", required=True, choices=[Method.CRS, Method.RW, Method.D2, Method.D3]
    )
    construct.add_argument("--n", type=parse_count, help="Number of items (1e6, 3^13 ok).")
    construct.add_argument("--d", type=int, help="Number of defectives to handle.")
    construct.add_argument(
        "--backtrack", action="store_true", help="crs: optimize the prime exponents."
    )
    construct.add_argument(
        "--maxpow", type=int, help="crs: bound on each prime power (default: largest prime)."
    )
    construct.add_argument("--q", type=int, help="d2/d3: digit count.")
    construct.add_argument("--k", type=int, help="rw: resolvability slack (default d).")
    construct.add_argument("--tparam", type=int, help="rw: t, for 2t rows (default sized).")
    construct.add_argument("--seed", type=int, default=0, help="rw: generator seed.")
    construct.add_argument("--out", help="Matrix file to write (default: stdout).")
    construct.set_defaults(handler=cmd_construct)

    decode = commands.add_parser("decode", help="Decode an outcome file.")
    decode.add_argument("matrix")
    decode.add_argument("outcomes")
    decode.add_argument(
        "--separable", action="store_true", help="Use the exhaustive separable decoder."
    )
    decode.add_argument("--force", action="store_true", help="Lift brute-force limits.")
    decode.add_argument("--dump-survivors", action="store_true")
    decode.set_defaults(handler=cmd_decode)

    simulate = commands.add_parser("simulate", help="Run a matrix on simulated defectives.")
    simulate.add_argument("matrix")
    simulate.add_argument("--defectives", type=_item_list, help="Comma-separated items.")
    simulate.add_argument("--random", type=int, metavar="COUNT", help="Random defectives.")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument(
        "--trials", type=int, help="Repeat --random over seeds seed .. seed+trials-1."
    )
    simulate.add_argument("--outcomes", help="Outcome file to write (default: stdout).")
    simulate.add_argument("--dump-survivors", action="store_true")
    simulate.set_defaults(handler=cmd_simulate)

    verify = commands.add_parser("verify", help="Brute-force check a matrix property.")
    verify.add_argument("matrix")
    prop = verify.add_mutually_exclusive_group(required=True)
    prop.add_argument("--disjunct", type=int, metavar="D")
    prop.add_argument("--separable", type=int, metavar="D")
    prop.add_argument("--resolvable", type=int, nargs=2, metavar=("D", "K"))
    verify.add_argument("--force", action="store_true", help="Lift brute-force limits.")
    verify.set_defaults(handler=cmd_verify)

    two_stage = commands.add_parser("two-stage", help="Run rake-and-winnow.")
    two_stage.add_argument("--n", type=parse_count, required=True)
    two_stage.add_argument("--d", type=int, required=True)
    two_stage.add_argument("--k", type=int, help="Resolvability slack (default d).")
    two_stage.add_argument("--seed", type=int, default=0)
    two_stage.add_argument(
        "--hidden", type=_item_list, help="Defective items (default: d random items)."
    )
    two_stage.add_argument(
        "--retry", type=int, default=0, help="On stage-1 failure retry with seed+1."
    )
    two_stage.add_argument(
        "--trials", type=int, help="Run many seeded trials ($CGT_THREADS workers)."
    )
    two_stage.set_defaults(handler=cmd_two_stage)

    compare = commands.add_parser("compare", help="Compare test counts of designs.")
    compare.add_argument("--d", type=int, required=True)
    compare.add_argument(
        "--n", type=_count_list, help="Comma-separated n values (default: stored tables)."
    )
    compare.add_argument(
        "--methods", type=_method_list, help=f"Any of {','.join(TableMethod.ALL)}."
    )
    compare.add_argument("--format", choices=["text", "csv"], default="text")
    compare.add_argument(
        "--fixture", action="store_true", help="Diff against the stored published values."
    )
    compare.add_argument(
        "--crossover", action="store_true", help="Report where crs stops beating hs."
    )
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    provider = None
    try:
        settings = Settings.from_env()
        provider = tracing_setup.configure(
            "cgt",
            settings.otlp_headers,
            otlp_endpoint=args.otlp_endpoint or settings.otlp_endpoint,
            console=args.trace_console,
        )
        with _tracer.start_as_current_span(
            SpanName.ROOT, {EventAttrKey.COMMAND: args.command}
        ):
            return args.handler(args)
    except ProtocolViolationError as e:
        print(f"cgt: {e}", file=sys.stderr)
        return EXIT_FAIL
    except GroupTestingError as e:
        print(f"cgt: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if provider is not None:
            provider.shutdown()
