"""Rake-and-winnow: a randomized two-stage identification protocol.

Stage 1 runs the 2t pooled tests of a sample-injection matrix, where every item
is injected into t/d distinct random rows, and clears every item of a negative
test. For a (d, k)-resolvable matrix fewer than d + k items survive. Stage 2
tests each survivor individually.

Logarithms in the sizing formulas are base 2.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import logging
import math
from typing import Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from form_group_testing.config import Settings
from form_group_testing.context_aware import ContextAwareTracer, ctx
from form_group_testing.errors import InputError, ProtocolViolationError
from form_group_testing.matrix import (
    Candidates,
    DecodeResult,
    DefectiveSet,
    OutcomeVector,
    Overflow,
    TestMatrix,
    matrix_from_columns,
    ones_indices,
    run_tests,
    survivors,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method, SpanName
from form_group_testing.verify import find_resolvability_violation

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)

#: Name of the PRNG written into matrix files next to the seed.
GENERATOR = "numpy-pcg64"

# Second word of the seed sequence: hidden sets drawn in simulations and matrix
# columns (keyed by seed, stream, column) never share a stream.
_HIDDEN_SET_STREAM = 1
_COLUMN_STREAM = 2

_SEED_LIMIT = 2**64


def _round_up_to_multiple(x: float, d: int) -> int:
    t = math.ceil(x)
    return -(-t // d) * d


def _check_sizes(n: int, d: int, k: int) -> None:
    if d < 1 or d >= n:
        raise InputError(f"Need 1 <= d < n, got n={n}, d={d}.")
    if k < 1:
        raise InputError(f"Resolvability slack k must be at least 1, got {k}.")


def stage1_test_count(n: int, d: int, k: int) -> int:
    """Smallest multiple of d that is >= (d^2/k) lg(en/d) + d lg(en/k) + (d/k) lg n.

    A sample-injection matrix with 2t rows for this t is (d, k)-resolvable with
    probability at least 1 - 1/n. With k = d this is 2d lg(en/d) + lg n.
    """
    _check_sizes(n, d, k)
    raw = (
        (d * d / k) * math.log2(math.e * n / d)
        + d * math.log2(math.e * n / k)
        + (d / k) * math.log2(n)
    )
    return _round_up_to_multiple(raw, d)


def disjunct_test_count(n: int, d: int) -> int:
    """Sizing d^2 lg(en/d) + d lg(en) + d lg n: the random matrix is d-disjunct w.h.p."""
    return stage1_test_count(n, d, 1)


def fixed_set_test_count(n: int, d: int) -> int:
    """Sizing d (e + 1) lg n: (d, 1)-resolvable w.h.p. for one particular defective set."""
    _check_sizes(n, d, 1)
    return _round_up_to_multiple(d * (math.e + 1) * math.log2(n), d)


def false_positive_bound(n: int, d: int, t: int, k: int) -> float:
    """Tail bound (e mu / k)^k on k or more false positives for one fixed defective set.

    mu = n / 2^(t/d) bounds the expected number of non-defectives that collide
    with the defectives' rows. The bound is only meaningful while mu < 1.
    """
    _check_sizes(n, d, k)
    mu = n / 2 ** (t / d)
    return (math.e * mu / k) ** k


@dataclass(frozen=True)
class RWParams:
    """Parameters of a sample-injection matrix.

    :param tparam: t; the matrix has 2t rows and every column weight t/d.
    :param k: Resolvability slack; stage 1 fails once d + k items survive.
    :param seed: Seed of the generator named by `generator`.
    """

    n: int
    d: int
    k: int
    tparam: int
    seed: int = 0
    generator: str = GENERATOR

    def __post_init__(self):
        _check_sizes(self.n, self.d, self.k)
        if self.tparam < 1 or self.tparam % self.d:
            raise InputError(
                f"t must be a positive multiple of d={self.d}, got t={self.tparam}."
            )
        if not 0 <= self.seed < _SEED_LIMIT:
            raise InputError(f"Seed must fit in 64 unsigned bits, got {self.seed}.")
        if self.generator != GENERATOR:
            raise InputError(
                f"Unsupported generator {self.generator!r}, expected {GENERATOR!r}."
            )

    @classmethod
    def for_instance(
        cls, n: int, d: int, k: Optional[int] = None, seed: int = 0
    ) -> "RWParams":
        """Params sized by stage1_test_count; k defaults to d."""
        k = d if k is None else k
        return cls(n=n, d=d, k=k, tparam=stage1_test_count(n, d, k), seed=seed)

    @property
    def column_weight(self) -> int:
        return self.tparam // self.d

    @property
    def rows(self) -> int:
        return 2 * self.tparam

    def with_seed(self, seed: int) -> "RWParams":
        return replace(self, seed=seed % _SEED_LIMIT)

    def to_params_field(self) -> str:
        return f"tparam={self.tparam};k={self.k};seed={self.seed};gen={self.generator}"


def _injection_rows(params: RWParams, j: int) -> List[int]:
    """The t/d distinct rows column j is injected into, ascending.

    Each column draws from its own PCG64 substream keyed by (seed, j), so a column
    never depends on how many columns came before it.
    """
    rng = np.random.Generator(np.random.PCG64([params.seed, _COLUMN_STREAM, j]))
    return sorted(rng.choice(params.rows, size=params.column_weight, replace=False).tolist())


def build_rw_matrix(params: RWParams) -> TestMatrix:
    with ctx.set(
        {
            EventAttrKey.METHOD: Method.RW,
            EventAttrKey.N: params.n,
            EventAttrKey.D: params.d,
            EventAttrKey.SEED: params.seed,
        }
    ):
        with _tracer.start_as_current_span(
            SpanName.CONSTRUCT_RW, {EventAttrKey.T: params.rows, EventAttrKey.K: params.k}
        ):
            columns = [_injection_rows(params, j) for j in range(params.n)]
            return matrix_from_columns(
                params.n, columns, params.rows, method=Method.RW, d=params.d, params=params
            )


@_tracer.traced(SpanName.DECODE_STAGE1)
def decode_stage1(m: TestMatrix, o: OutcomeVector) -> DecodeResult:
    """Winnows a stage-1 outcome to the candidates stage 2 would test.

    :return: Candidates, or Overflow when d + k or more items survive.
    """
    params = m.params
    if not isinstance(params, RWParams):
        raise InputError(f"Stage-1 decoding needs a rake-and-winnow matrix, got {m.method}.")
    alive = survivors(m, o)
    count = alive.count()
    if count >= params.d + params.k:
        result = Overflow(count)
    else:
        result = Candidates(DefectiveSet(tuple(ones_indices(alive))))
    _tracer.add_event(
        EventAttrValue.DECODE_RESULT,
        {EventAttrKey.RESULT: type(result).__name__, EventAttrKey.CANDIDATES: count},
    )
    return result


def is_dk_resolvable(m: TestMatrix, d: int, k: int, force: bool = False) -> bool:
    """True iff every d-subset D leaves fewer than k columns outside D indistinguishable.

    (d, 1)-resolvable is the same as d-disjunct.
    """
    return find_resolvability_violation(m, d, k, force) is None


class SubsetOracle(Protocol):
    """Answers pooled tests: is any item of the pool defective?"""

    def query(self, items: Sequence[int]) -> bool:
        ...


class HiddenSetOracle:
    """Simulated oracle over a fixed hidden defective set; counts the pools it answers."""

    def __init__(self, hidden: DefectiveSet):
        self.hidden = hidden
        self.queries = 0

    def query(self, items: Sequence[int]) -> bool:
        self.queries += 1
        return any(i in self.hidden for i in items)


@dataclass(frozen=True)
class TwoStageTranscript:
    """What a rake-and-winnow run did.

    When `failed`, stage 1 left d + k or more candidates and stage 2 did not run,
    so `final` is empty.
    """

    stage1_candidates: DefectiveSet
    stage1_tests: int
    stage2_tests: int
    final: DefectiveSet
    failed: bool
    seed: int = 0

    @property
    def total_tests(self) -> int:
        return self.stage1_tests + self.stage2_tests


def two_stage_identify(
    params: RWParams, oracle: SubsetOracle, m: Optional[TestMatrix] = None
) -> TwoStageTranscript:
    """Runs both stages against the oracle.

    :param m: The stage-1 matrix if already built from `params`.
    :raises ProtocolViolationError: The stage-2 answers do not explain a positive
        stage-1 test, so the oracle contradicted itself.
    """
    m = m or build_rw_matrix(params)
    with ctx.set({EventAttrKey.SEED: params.seed}):
        with _tracer.start_as_current_span(SpanName.TWO_STAGE) as span:
            outcome = OutcomeVector.from_iterable(oracle.query(row) for row in m.rows)
            candidates = DefectiveSet(tuple(ones_indices(survivors(m, outcome))))
            span.set_attribute(EventAttrKey.CANDIDATES, len(candidates))

            if len(candidates) >= params.d + params.k:
                _log.info(
                    "Stage 1 left %d candidates, at least d + k = %d",
                    len(candidates),
                    params.d + params.k,
                )
                _tracer.add_event(
                    EventAttrValue.STAGE1_OVERFLOW, {EventAttrKey.CANDIDATES: len(candidates)}
                )
                return TwoStageTranscript(
                    stage1_candidates=candidates,
                    stage1_tests=m.t,
                    stage2_tests=0,
                    final=DefectiveSet(),
                    failed=True,
                    seed=params.seed,
                )

            final = DefectiveSet(tuple(c for c in candidates if oracle.query((c,))))
            if run_tests(m, final) != outcome:
                raise ProtocolViolationError(
                    f"Oracle answers are inconsistent: individually positive items {final}"
                    f" do not explain the stage-1 outcome {outcome}."
                )
            return TwoStageTranscript(
                stage1_candidates=candidates,
                stage1_tests=m.t,
                stage2_tests=len(candidates),
                final=final,
                failed=False,
                seed=params.seed,
            )


def identify_with_retry(
    params: RWParams, oracle: SubsetOracle, retries: int = 0
) -> List[TwoStageTranscript]:
    """two_stage_identify, rerun with seed + 1 after each stage-1 failure.

    :return: The transcript of every attempt; the last one is the outcome.
    """
    if retries < 0:
        raise InputError(f"Retries must be non-negative, got {retries}.")
    transcripts = []
    for attempt in range(retries + 1):
        transcript = two_stage_identify(params.with_seed(params.seed + attempt), oracle)
        transcripts.append(transcript)
        if not transcript.failed:
            break
    return transcripts


class TrialMode:
    #: The same hidden set in every trial.
    FIXED = "fixed"
    #: A fresh uniformly random d-subset per trial, drawn from the trial's seed.
    RANDOM = "random"

    ALL = (FIXED, RANDOM)


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    failures: int
    exact: int
    false_positives: int

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0


def random_hidden_set(n: int, d: int, seed: int) -> DefectiveSet:
    rng = np.random.Generator(np.random.PCG64([seed, _HIDDEN_SET_STREAM]))
    return DefectiveSet(tuple(rng.choice(n, size=d, replace=False).tolist()))


def _run_trial(job: Tuple[RWParams, Optional[DefectiveSet]]) -> Tuple[bool, bool, int]:
    params, hidden = job
    if hidden is None:
        hidden = random_hidden_set(params.n, params.d, params.seed)
    transcript = two_stage_identify(params, HiddenSetOracle(hidden))
    false_positives = sum(1 for i in transcript.final if i not in hidden)
    return transcript.failed, transcript.final == hidden, false_positives


def simulate_trials(
    n: int,
    d: int,
    seeds: Iterable[int],
    k: Optional[int] = None,
    mode: str = TrialMode.RANDOM,
    hidden: Optional[DefectiveSet] = None,
    tparam: Optional[int] = None,
    threads: Optional[int] = None,
) -> TrialSummary:
    """Runs one seeded two-stage trial per seed and tallies the results.

    :param hidden: The hidden set for FIXED mode; defaults to items 0 .. d-1.
    :param threads: Worker processes; defaults to Settings.threads. Results are
        reduced in seed order either way, so the summary does not depend on it.
    """
    if mode not in TrialMode.ALL:
        raise InputError(f"Unknown trial mode {mode!r}, expected one of {TrialMode.ALL}.")
    k = d if k is None else k
    tparam = tparam or stage1_test_count(n, d, k)
    if mode == TrialMode.FIXED:
        hidden = hidden if hidden is not None else DefectiveSet(tuple(range(d)))
        hidden.check_within(n)
    else:
        hidden = None
    jobs = [(RWParams(n, d, k, tparam, seed), hidden) for seed in seeds]
    threads = threads or Settings.from_env().threads

    with ctx.set({EventAttrKey.METHOD: Method.RW, EventAttrKey.N: n, EventAttrKey.D: d}):
        with _tracer.start_as_current_span(
            SpanName.TRIALS, {EventAttrKey.K: k, EventAttrKey.T: 2 * tparam}
        ):
            if threads > 1 and len(jobs) > 1:
                chunksize = max(1, len(jobs) // (4 * threads))
                with ProcessPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(_run_trial, jobs, chunksize=chunksize))
            else:
                results = [_run_trial(job) for job in jobs]

    summary = TrialSummary(
        trials=len(results),
        failures=sum(1 for failed, _, _ in results if failed),
        exact=sum(1 for _, exact, _ in results if exact),
        false_positives=sum(fp for _, _, fp in results),
    )
    _log.info(
        "%d trials, %d stage-1 failures, %d exact",
        summary.trials,
        summary.failures,
        summary.exact,
    )
    return summary
