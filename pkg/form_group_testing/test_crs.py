from itertools import combinations
import math

from hypothesis import given, settings, strategies as st
import pytest

from form_group_testing.crs import (
    PrimePowerPlan,
    backtrack_plan,
    bound_report,
    build_crs_matrix,
    describe_plan,
    optimize_exponents,
    select_prime_plan,
    sigma_bound,
    theorem_bound,
)
from form_group_testing.errors import InputError, NoSolutionError
from form_group_testing.matrix import (
    DefectiveSet,
    Identified,
    Overflow,
    decode_disjunct,
    run_tests,
    sampling_rate,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, SpanName
from form_group_testing.primes import primes_upto, prime_sum
from form_group_testing.verify import is_d_disjunct, is_separable_upto


def test_select_prime_plan():
    plan = select_prime_plan(100, 2)
    assert plan.primes == (2, 3, 5, 7, 11, 13)
    assert plan.cost == 41
    assert plan.product == 30030
    assert select_prime_plan(2, 1).moduli == (2,)
    assert select_prime_plan(100, 5).cost == 160


def test_product_threshold_is_inclusive():
    # 2 * 3 = 6 = n^d, so no further prime is needed.
    plan = select_prime_plan(6, 1)
    assert plan.primes == (2, 3)
    m = build_crs_matrix(6, plan)
    assert str(run_tests(m, DefectiveSet.of(4))) == "10010"


def test_select_prime_plan_rejects_bad_sizes():
    with pytest.raises(InputError):
        select_prime_plan(5, 5)
    with pytest.raises(InputError):
        select_prime_plan(5, 0)


def test_backtrack_plan():
    plan = backtrack_plan(100, 2)
    assert plan.tokens() == ["2^2", "3^2", "5", "7", "11"]
    assert plan.cost == 36
    assert plan.search_exponents == (2, 2, 1, 1, 1, 0)
    assert describe_plan(plan) == "n = 100 d = 2 : 2^2 3^2 5 7 11 total tests: 36"
    assert backtrack_plan(100, 5).cost == 131


def test_backtrack_never_worse_than_primes():
    for n, d in [(10, 1), (50, 2), (100, 3), (1000, 2), (10**6, 3)]:
        base = select_prime_plan(n, d)
        plan = backtrack_plan(n, d)
        assert plan.cost <= base.cost
        assert plan.product >= n**d


def _brute_force(primes, maxpow, target):
    """Lexicographically smallest (cost, exponents) over every assignment."""
    choices = []
    for p in primes:
        powers = [0]
        while p ** (powers[-1] + 1) <= maxpow:
            powers.append(powers[-1] + 1)
        choices.append(powers)
    best = None
    stack = [[]]
    while stack:
        exps = stack.pop()
        if len(exps) == len(primes):
            product = math.prod(p**e for p, e in zip(primes, exps))
            if product >= target:
                cost = sum(p**e for p, e in zip(primes, exps) if e)
                if best is None or (cost, exps) < best:
                    best = (cost, exps)
            continue
        stack.extend(exps + [e] for e in choices[len(exps)])
    return best


@pytest.mark.parametrize(
    "primes, maxpow, target",
    [
        ((2, 3, 5, 7), 7, 200),
        ((2, 3, 5, 7, 11), 11, 10**4),
        ((2, 3, 5, 7, 11, 13), 13, 10**4),
        ((2, 3, 5), 30, 2000),
        ((3, 5, 7), 10, 100),
        ((2, 3, 5, 7, 11, 13), 20, 5 * 10**5),
    ],
)
def test_optimize_exponents_matches_exhaustive_search(primes, maxpow, target):
    plan = optimize_exponents(primes, maxpow, target)
    cost, exps = _brute_force(primes, maxpow, target)
    assert plan.cost == cost
    assert list(plan.search_exponents) == exps


def test_optimize_exponents_edge_cases():
    assert optimize_exponents((2, 3), 3, 1).search_exponents == (0, 0)
    with pytest.raises(NoSolutionError):
        optimize_exponents((2, 3), 3, 7)
    with pytest.raises(NoSolutionError):
        optimize_exponents((2, 3), 4, 13)
    with pytest.raises(InputError):
        optimize_exponents((3, 2), 3, 5)


def test_plan_tokens_round_trip():
    plan = PrimePowerPlan.from_tokens("2^2,3^2,5,7,11", n=100, d=2)
    assert plan.entries == ((2, 2), (3, 2), (5, 1), (7, 1), (11, 1))
    assert plan.to_params_field() == "primepowers=2^2,3^2,5,7,11"
    with pytest.raises(InputError, match="below"):
        PrimePowerPlan.from_tokens("2,3,5", n=100, d=2)
    with pytest.raises(InputError):
        PrimePowerPlan.from_tokens("4,5")
    with pytest.raises(InputError):
        PrimePowerPlan.from_tokens("3,2")
    with pytest.raises(InputError):
        PrimePowerPlan.from_tokens("2^x")


def test_matrix_shape():
    plan = select_prime_plan(10, 3)
    m = build_crs_matrix(10, plan)
    assert m.t == plan.cost
    # Every item lies in exactly one residue class per modulus.
    assert all(len(m.column(j)) == len(plan.moduli) for j in range(10))
    assert sampling_rate(m) == bound_report(10, 3).sampling_rate == 5
    # Residue 10 of 11 exceeds every item.
    assert m.rows[-1] == ()
    assert m.rows[-2] == (9,)


@pytest.mark.parametrize("n, d", [(8, 1), (12, 2), (16, 2), (10, 3), (9, 4)])
def test_crs_is_disjunct(n, d):
    assert is_d_disjunct(build_crs_matrix(n, select_prime_plan(n, d)), d)
    assert is_d_disjunct(build_crs_matrix(n, backtrack_plan(n, d)), d)


def test_crs_decodes_every_small_set():
    n, d = 30, 2
    m = build_crs_matrix(n, backtrack_plan(n, d))
    for a in range(n):
        for b in range(a, n):
            hidden = DefectiveSet.of(a, b)
            assert decode_disjunct(m, run_tests(m, hidden), d) == Identified(hidden)


@pytest.mark.slow
@pytest.mark.parametrize("d", [1, 2, 3])
def test_crs_decodes_every_set_up_to_64_items(d):
    for n in range(d + 1, 65):
        m = build_crs_matrix(n, select_prime_plan(n, d))
        for size in range(d + 1):
            for hidden in combinations(range(n), size):
                outcome = run_tests(m, DefectiveSet(hidden))
                assert decode_disjunct(m, outcome, d) == Identified(DefectiveSet(hidden))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_every_small_crs_matrix_is_disjunct(d):
    for n in range(d + 1, 21):
        m = build_crs_matrix(n, select_prime_plan(n, d))
        assert is_d_disjunct(m, d), n
        assert is_separable_upto(m, d), n


def test_test_count_grows_with_n():
    for d in [1, 2, 3]:
        counts = [select_prime_plan(10**k, d).cost for k in (3, 6, 9)]
        assert counts == sorted(set(counts)), counts


def test_crs_reports_overflow():
    m = build_crs_matrix(30, select_prime_plan(30, 2))
    result = decode_disjunct(m, run_tests(m, DefectiveSet(tuple(range(15)))), 2)
    assert isinstance(result, Overflow)


def test_build_needs_covering_plan():
    with pytest.raises(InputError):
        build_crs_matrix(100, PrimePowerPlan(((2, 1), (3, 1))), d=2)
    with pytest.raises(InputError, match="d"):
        build_crs_matrix(100, PrimePowerPlan(((2, 1), (3, 1))))


def test_bounds():
    assert theorem_bound(100, 2) == pytest.approx(87.9, abs=0.05)
    report = bound_report(100, 2)
    assert report.x == 19
    assert report.sigma_bound == prime_sum(19) == 77
    assert report.actual_t == 41 <= report.sigma_bound <= report.theorem_bound
    # The plan only uses primes <= x, and pi(x) is below twice the sampling bound.
    assert report.sampling_rate == 6
    assert report.sampling_rate <= 2 * report.sampling_bound


@pytest.mark.parametrize("n, d", [(100, 2), (10**6, 3), (10**10, 5), (10**30, 10)])
def test_test_count_within_prime_sum(n, d):
    report = bound_report(n, d)
    assert report.actual_t <= report.sigma_bound <= report.theorem_bound
    assert report.sampling_rate <= 2 * report.sampling_bound


@pytest.mark.slow
def test_sigma_bound_holds_below_the_799th_prime():
    primes = primes_upto(6131).tolist()
    total = 0
    index = 0
    for x in range(2, 6131):
        while index < len(primes) and primes[index] <= x:
            total += primes[index]
            index += 1
        assert sigma_bound(x) > total, x


def test_plan_events(span_exporter):
    backtrack_plan(100, 2)
    spans = span_exporter.get_finished_spans()
    (search,) = [s for s in spans if s.name == SpanName.PLAN_SEARCH]
    names = [e.name for e in search.events]
    assert EventAttrValue.PLAN_OPTIMIZED in names
    optimized = search.events[names.index(EventAttrValue.PLAN_OPTIMIZED)]
    assert optimized.attributes[EventAttrKey.COST] == 36
    assert optimized.attributes[EventAttrKey.PLAN] == "2^2,3^2,5,7,11"


@settings(deadline=None, max_examples=50)
@given(
    st.integers(min_value=3, max_value=300).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.integers(min_value=1, max_value=min(4, n - 1)),
            st.lists(st.integers(0, n - 1), max_size=4, unique=True),
        )
    )
)
def test_crs_round_trip(case):
    n, d, hidden = case
    hidden = DefectiveSet(tuple(hidden[:d]))
    m = build_crs_matrix(n, select_prime_plan(n, d))
    assert decode_disjunct(m, run_tests(m, hidden), d) == Identified(hidden)
