import functools
from itertools import combinations

from hypothesis import given, settings, strategies as st
import pytest

from form_group_testing.errors import InputError, ProtocolViolationError
from form_group_testing.matrix import (
    DefectiveSet,
    Identified,
    OutcomeVector,
    ProbeCounter,
    run_tests,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method, SpanName
from form_group_testing.ternary import (
    D2Params,
    build_d2_matrix,
    d2_params_for,
    d2_test_count,
    decode_d2,
)
from form_group_testing.verify import is_separable_upto


def _sets_upto_two(n):
    yield ()
    for i in range(n):
        yield (i,)
    yield from combinations(range(n), 2)


@pytest.mark.parametrize("q, t", [(1, 3), (2, 7), (5, 25), (7, 42)])
def test_test_count(q, t):
    assert d2_test_count(q) == t
    assert build_d2_matrix(q, 3**q).t == t


def test_params_for():
    assert d2_params_for(100) == D2Params(5, 100)
    assert d2_params_for(81) == D2Params(4, 81)
    assert d2_params_for(1) == D2Params(1, 1)
    assert D2Params(5, 100).to_params_field() == "q=5;effn=100"
    with pytest.raises(InputError):
        D2Params(2, 10)
    with pytest.raises(InputError):
        D2Params(0, 1)


def test_row_layout():
    m = build_d2_matrix(1, 3)
    assert str(run_tests(m, DefectiveSet.of(0, 2))) == "101"
    m = build_d2_matrix(2, 9)
    params = m.params
    # Item 5 has digits X_0 = 2, X_1 = 1.
    assert m.column(5) == [params.b_row(0, 2), params.b_row(1, 1)]
    # Item 4 has equal digits, so it is in the only C row.
    assert params.c_row(0, 1) == 6
    assert m.column(4) == [1, 4, 6]
    assert m.method == Method.D2 and m.d == 2


def test_c_rows_are_lexicographic():
    params = D2Params(4, 81)
    pairs = [(p, p2) for p in range(4) for p2 in range(p + 1, 4)]
    assert [params.c_row(p, p2) for p, p2 in pairs] == list(range(12, 18))


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_decodes_every_set_of_at_most_two(q):
    n = 3**q
    m = build_d2_matrix(q, n)
    for hidden in _sets_upto_two(n):
        probes = ProbeCounter()
        result = decode_d2(run_tests(m, DefectiveSet(hidden)), m.params, probes)
        assert result == Identified(DefectiveSet(hidden))
        assert probes.probes <= m.t


def test_truncated_design():
    m = build_d2_matrix(3, 20)
    assert m.n == 20
    for hidden in _sets_upto_two(20):
        assert decode_d2(run_tests(m, DefectiveSet(hidden)), m.params) == Identified(
            DefectiveSet(hidden)
        )


@pytest.mark.parametrize("q", [2, 3])
def test_is_two_separable(q):
    assert is_separable_upto(build_d2_matrix(q, 3**q), 2)


def test_three_values_at_one_digit():
    m = build_d2_matrix(1, 3)
    with pytest.raises(ProtocolViolationError, match="more than two"):
        decode_d2(run_tests(m, DefectiveSet.of(0, 1, 2)), m.params)


def test_item_beyond_effective_n():
    full = build_d2_matrix(2, 9)
    outcome = run_tests(full, DefectiveSet.of(8))
    with pytest.raises(ProtocolViolationError, match="beyond"):
        decode_d2(outcome, D2Params(2, 5))


def test_inconsistent_outcomes():
    params = D2Params(2, 9)
    # Digit 0 has a positive B test, digit 1 none.
    with pytest.raises(ProtocolViolationError):
        decode_d2(OutcomeVector.from_string("1000000"), params)
    with pytest.raises(InputError):
        decode_d2(OutcomeVector.from_string("100"), params)


def test_decode_event(span_exporter):
    m = build_d2_matrix(5, 243)
    decode_d2(run_tests(m, DefectiveSet.of(17, 200)), m.params)
    (span,) = [s for s in span_exporter.get_finished_spans() if s.name == SpanName.DECODE_D2]
    (event,) = span.events
    assert event.name == EventAttrValue.DECODE_RESULT
    assert event.attributes[EventAttrKey.ITEMS] == "{17,200}"
    assert event.attributes[EventAttrKey.Q] == 5


@functools.lru_cache(maxsize=None)
def _q8_matrix():
    return build_d2_matrix(8, 3**8)


@settings(deadline=None)
@given(st.sets(st.integers(0, 3**8 - 1), max_size=2))
def test_q8_round_trip(hidden):
    m = _q8_matrix()
    hidden = DefectiveSet(tuple(hidden))
    assert decode_d2(run_tests(m, hidden), m.params) == Identified(hidden)
