from itertools import combinations

from hypothesis import assume, given, strategies as st
import pytest

from form_group_testing.errors import InputError, ProtocolViolationError
from form_group_testing.matrix import (
    Candidates,
    DefectiveSet,
    Overflow,
    identity_matrix,
    run_tests,
    sampling_rate,
    single_pool_matrix,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method, SpanName
from form_group_testing.rake_winnow import (
    HiddenSetOracle,
    RWParams,
    TrialMode,
    build_rw_matrix,
    decode_stage1,
    disjunct_test_count,
    false_positive_bound,
    fixed_set_test_count,
    identify_with_retry,
    is_dk_resolvable,
    random_hidden_set,
    simulate_trials,
    stage1_test_count,
    two_stage_identify,
)
from form_group_testing.verify import is_d_disjunct


@pytest.mark.parametrize(
    "n, d, k, t",
    [(100, 2, 2, 36), (1024, 8, 8, 152), (100, 2, 1, 58), (256, 4, 4, 68)],
)
def test_stage1_test_count(n, d, k, t):
    assert stage1_test_count(n, d, k) == t


def test_other_sizings():
    assert disjunct_test_count(100, 2) == 58
    assert fixed_set_test_count(100, 2) == 50
    assert false_positive_bound(64, 2, 36, 2) < 1e-6
    assert false_positive_bound(64, 2, 40, 2) < false_positive_bound(64, 2, 36, 2)
    with pytest.raises(InputError):
        stage1_test_count(4, 4, 1)
    with pytest.raises(InputError):
        stage1_test_count(100, 2, 0)


def test_params_validation():
    with pytest.raises(InputError, match="multiple"):
        RWParams(n=16, d=2, k=2, tparam=7)
    with pytest.raises(InputError, match="64"):
        RWParams(n=16, d=2, k=2, tparam=8, seed=-1)
    with pytest.raises(InputError, match="generator"):
        RWParams(n=16, d=2, k=2, tparam=8, generator="mt19937")


def test_params_helpers():
    params = RWParams.for_instance(100, 2, seed=12345)
    assert (params.k, params.tparam, params.rows, params.column_weight) == (2, 36, 72, 18)
    assert params.to_params_field() == "tparam=36;k=2;seed=12345;gen=numpy-pcg64"
    assert params.with_seed(2**64 + 3).seed == 3
    assert RWParams.for_instance(100, 2, k=1).tparam == 58


def test_matrix_shape_and_weights():
    params = RWParams(n=16, d=2, k=2, tparam=8, seed=1)
    m = build_rw_matrix(params)
    assert m.t == 16
    assert m.method == Method.RW
    assert all(len(m.column(j)) == 4 for j in range(16))
    assert sampling_rate(m) == 4


def test_matrix_is_deterministic_per_seed():
    params = RWParams(n=16, d=2, k=2, tparam=8, seed=1)
    assert build_rw_matrix(params) == build_rw_matrix(params)
    assert build_rw_matrix(params) != build_rw_matrix(params.with_seed(2))


def test_columns_depend_only_on_seed_and_index():
    small = build_rw_matrix(RWParams(n=16, d=2, k=2, tparam=8, seed=7))
    large = build_rw_matrix(RWParams(n=200, d=2, k=2, tparam=8, seed=7))
    assert [large.column(j) for j in range(16)] == [small.column(j) for j in range(16)]
    assert all(len(large.column(j)) == 4 for j in range(200))


def test_pairs_hit_at_most_t_rows():
    params = RWParams.for_instance(16, 2, seed=5)
    m = build_rw_matrix(params)
    for pair in combinations(range(16), 2):
        assert run_tests(m, DefectiveSet(pair)).positives() <= params.tparam


def test_decode_stage1():
    params = RWParams.for_instance(64, 2, seed=3)
    m = build_rw_matrix(params)
    hidden = DefectiveSet.of(5, 50)
    result = decode_stage1(m, run_tests(m, hidden))
    # Either few enough candidates, all defectives among them, or an overflow.
    if isinstance(result, Candidates):
        assert set(hidden) <= set(result.items)
        assert len(result.items) < params.d + params.k
    else:
        assert isinstance(result, Overflow)
    crowded = DefectiveSet(tuple(range(10)))
    assert isinstance(decode_stage1(m, run_tests(m, crowded)), Overflow)
    with pytest.raises(InputError):
        decode_stage1(identity_matrix(4), run_tests(identity_matrix(4), DefectiveSet()))


def test_is_dk_resolvable_small_matrices():
    assert is_dk_resolvable(identity_matrix(5), 2, 1)
    assert is_dk_resolvable(single_pool_matrix(3), 1, 3)
    assert not is_dk_resolvable(single_pool_matrix(3), 1, 2)
    m = build_rw_matrix(RWParams.for_instance(12, 2, seed=0))
    assert is_dk_resolvable(m, 2, 1) == is_d_disjunct(m, 2)


def test_two_stage_identifies_hidden_set():
    params = RWParams.for_instance(64, 2, seed=0)
    hidden = DefectiveSet.of(3, 40)
    oracle = HiddenSetOracle(hidden)
    transcripts = identify_with_retry(params, oracle, retries=5)
    last = transcripts[-1]
    assert not last.failed
    assert last.final == hidden
    assert last.stage1_tests == params.rows
    assert last.stage2_tests == len(last.stage1_candidates)
    assert set(last.final.items) <= set(last.stage1_candidates.items)
    assert oracle.queries == sum(t.total_tests for t in transcripts)


def test_two_stage_empty_hidden_set():
    transcript = two_stage_identify(
        RWParams.for_instance(32, 2, seed=9), HiddenSetOracle(DefectiveSet())
    )
    assert not transcript.failed
    assert transcript.stage1_candidates == DefectiveSet()
    assert transcript.final == DefectiveSet()
    assert transcript.stage2_tests == 0


def test_two_stage_reports_overflow():
    params = RWParams.for_instance(64, 2, seed=4)
    transcripts = identify_with_retry(
        params, HiddenSetOracle(DefectiveSet(tuple(range(0, 64, 4)))), retries=2
    )
    assert [t.seed for t in transcripts] == [4, 5, 6]
    assert all(t.failed and t.final == DefectiveSet() for t in transcripts)
    assert all(t.stage2_tests == 0 for t in transcripts)
    with pytest.raises(InputError):
        identify_with_retry(params, HiddenSetOracle(DefectiveSet()), retries=-1)


class _SingletonLiar:
    """Answers pools truthfully but denies every individual test."""

    def __init__(self, hidden):
        self.truth = HiddenSetOracle(hidden)

    def query(self, items):
        return len(items) > 1 and self.truth.query(items)


def test_inconsistent_oracle_is_a_protocol_violation():
    hidden = DefectiveSet.of(7, 21)
    seed = next(
        s
        for s in range(20)
        if not two_stage_identify(
            RWParams.for_instance(64, 2, seed=s), HiddenSetOracle(hidden)
        ).failed
    )
    with pytest.raises(ProtocolViolationError):
        two_stage_identify(RWParams.for_instance(64, 2, seed=seed), _SingletonLiar(hidden))


def test_random_hidden_set():
    s = random_hidden_set(100, 4, 7)
    assert len(s) == 4
    assert all(0 <= i < 100 for i in s)
    assert s == random_hidden_set(100, 4, 7)


def test_simulate_trials_fixed_mode():
    summary = simulate_trials(
        32, 2, range(20), mode=TrialMode.FIXED, hidden=DefectiveSet.of(1, 2), threads=1
    )
    assert summary.trials == 20
    assert summary.exact + summary.failures == 20
    assert summary.false_positives == 0
    with pytest.raises(InputError):
        simulate_trials(32, 2, range(2), mode="sometimes")


def test_simulate_trials_independent_of_workers():
    serial = simulate_trials(32, 2, range(12), threads=1)
    parallel = simulate_trials(32, 2, range(12), threads=2)
    assert serial == parallel


def test_trial_span(span_exporter):
    simulate_trials(16, 2, range(3), threads=1)
    (trials,) = [s for s in span_exporter.get_finished_spans() if s.name == SpanName.TRIALS]
    assert trials.attributes[EventAttrKey.N] == 16
    assert trials.attributes[EventAttrKey.K] == 2
    identify = [s for s in span_exporter.get_finished_spans() if s.name == SpanName.TWO_STAGE]
    assert len(identify) == 3
    assert all(s.parent.span_id == trials.context.span_id for s in identify)


def test_overflow_event(span_exporter):
    two_stage_identify(
        RWParams.for_instance(32, 2, seed=0), HiddenSetOracle(DefectiveSet(tuple(range(10))))
    )
    (span,) = [s for s in span_exporter.get_finished_spans() if s.name == SpanName.TWO_STAGE]
    assert [e.name for e in span.events] == [EventAttrValue.STAGE1_OVERFLOW]


@pytest.mark.slow
def test_resolvable_on_almost_every_seed():
    resolvable = sum(
        is_dk_resolvable(build_rw_matrix(RWParams.for_instance(32, 2, seed=s)), 2, 2)
        for s in range(100)
    )
    assert resolvable >= 99


@pytest.mark.slow
@pytest.mark.parametrize("n, d", [(64, 2), (256, 4)])
def test_failure_rate_below_two_over_n(n, d):
    summary = simulate_trials(n, d, range(10 * n), mode=TrialMode.RANDOM)
    assert summary.trials == 10 * n
    assert summary.failure_rate <= 2 / n
    assert summary.exact + summary.failures == summary.trials


@pytest.mark.slow
def test_fixed_set_rarely_fails():
    summary = simulate_trials(
        256, 4, range(100), mode=TrialMode.FIXED, hidden=DefectiveSet.of(0, 85, 170, 255)
    )
    assert summary.failures <= 1


@given(
    st.integers(min_value=2, max_value=10**6),
    st.integers(min_value=1, max_value=8),
)
def test_stage1_test_count_is_a_monotone_multiple_of_d(n, d):
    assume(d < n)
    t = stage1_test_count(n, d, d)
    assert t % d == 0
    assert t <= stage1_test_count(n + 1, d, d)
    assert stage1_test_count(n, d, 1) >= t


def test_decode_stage1_span(span_exporter):
    m = build_rw_matrix(RWParams.for_instance(32, 2, seed=0))
    decode_stage1(m, run_tests(m, DefectiveSet(tuple(range(10)))))
    (span,) = [
        s for s in span_exporter.get_finished_spans() if s.name == SpanName.DECODE_STAGE1
    ]
    (event,) = span.events
    assert event.name == EventAttrValue.DECODE_RESULT
    assert event.attributes[EventAttrKey.RESULT] == "Overflow"
    assert event.attributes[EventAttrKey.CANDIDATES] >= 4
