from itertools import combinations

import numpy as np
import pytest

from form_group_testing.binary_pairs import (
    D3Params,
    build_d3_matrix,
    d3_params_for,
    d3_test_count,
    decode_d3,
)
from form_group_testing.errors import InputError, ProtocolViolationError
from form_group_testing.matrix import (
    DefectiveSet,
    Identified,
    OutcomeVector,
    ProbeCounter,
    run_tests,
)
from form_group_testing.otel_value import Method
from form_group_testing.verify import is_separable_upto


def _sets_upto_three(n):
    for size in range(4):
        yield from combinations(range(n), size)


@pytest.mark.parametrize("q, t", [(2, 4), (3, 12), (7, 84), (10, 180)])
def test_test_count(q, t):
    assert d3_test_count(q) == t
    assert build_d3_matrix(q, 2**q).t == t


def test_params_for():
    assert d3_params_for(100) == D3Params(7, 100)
    assert d3_params_for(1) == D3Params(2, 1)
    assert d3_params_for(5) == D3Params(3, 5)
    with pytest.raises(InputError):
        D3Params(1, 2)
    with pytest.raises(InputError):
        D3Params(3, 9)


def test_row_layout():
    m = build_d3_matrix(2, 4)
    assert str(run_tests(m, DefectiveSet.of(0, 3))) == "1001"
    params = D3Params(3, 8)
    assert params.row(0, 1, 1, 0) == 2
    assert params.row(1, 2, 0, 0) == 8
    # A descending pair maps onto its mirror.
    assert params.row(2, 0, 1, 0) == params.row(0, 2, 0, 1)
    assert m.method == Method.D3 and m.d == 3


@pytest.mark.parametrize("q", [2, 3, 4])
def test_decodes_every_set_of_at_most_three(q):
    n = 2**q
    m = build_d3_matrix(q, n)
    checked = 0
    for hidden in _sets_upto_three(n):
        probes = ProbeCounter()
        result = decode_d3(run_tests(m, DefectiveSet(hidden)), m.params, probes)
        assert result == Identified(DefectiveSet(hidden))
        assert probes.probes <= 3 * m.t
        checked += 1
    if q == 4:
        assert checked == 697


@pytest.mark.slow
def test_random_sets_at_q8():
    m = build_d3_matrix(8, 256)
    rng = np.random.Generator(np.random.PCG64(8))
    worst = 0
    for _ in range(10**4):
        size = int(rng.integers(0, 4))
        hidden = DefectiveSet(tuple(rng.choice(256, size=size, replace=False).tolist()))
        probes = ProbeCounter()
        assert decode_d3(run_tests(m, hidden), m.params, probes) == Identified(hidden)
        worst = max(worst, probes.probes)
    assert worst <= 3 * m.t


def test_truncated_design():
    m = build_d3_matrix(4, 11)
    for hidden in _sets_upto_three(11):
        assert decode_d3(run_tests(m, DefectiveSet(hidden)), m.params) == Identified(
            DefectiveSet(hidden)
        )


def test_large_q_spot_checks():
    m = build_d3_matrix(10, 1000)
    for hidden in [(0, 511, 999), (1, 2, 3), (100, 900), (512,), (0, 1023 - 24, 24)]:
        result = decode_d3(run_tests(m, DefectiveSet(hidden)), m.params)
        assert result == Identified(DefectiveSet(hidden))


@pytest.mark.parametrize("q", [2, 3])
def test_is_three_separable(q):
    assert is_separable_upto(build_d3_matrix(q, 2**q), 3)


def test_four_defectives_detected():
    m = build_d3_matrix(2, 4)
    with pytest.raises(ProtocolViolationError, match="more than three"):
        decode_d3(run_tests(m, DefectiveSet.of(0, 1, 2, 3)), m.params)


def test_bad_outcomes():
    params = D3Params(3, 8)
    with pytest.raises(InputError):
        decode_d3(OutcomeVector.from_string("1111"), params)
    # Only row <0, 1, 0, 0> is positive, so no B test is positive at position 2.
    with pytest.raises(ProtocolViolationError):
        decode_d3(OutcomeVector.from_string("1000" + "0000" + "0000"), params)
