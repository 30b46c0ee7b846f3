"""Binary-pair pooling design for up to three defectives, with an O(t) decoder.

Items are written with q binary digits X_0 .. X_{q-1} (X_0 least significant).
Row <p, p', v, v'> (p < p', rows ordered by (p, p', v, v')) pools the items with
X_p = v and X_p' = v'. t = 4 C(q, 2) = 2q^2 - 2q.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from form_group_testing.context_aware import ContextAwareTracer, ctx
from form_group_testing.errors import InputError, ProtocolViolationError
from form_group_testing.matrix import (
    DecodeResult,
    DefectiveSet,
    Identified,
    OutcomeVector,
    ProbeCounter,
    TestMatrix,
    radix_digits,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method, SpanName

_tracer = ContextAwareTracer(__name__)

RADIX = 2
_VALUE_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


def d3_test_count(q: int) -> int:
    if q < 2:
        raise InputError(f"The binary-pair design needs q >= 2, got q={q}.")
    return 2 * q * q - 2 * q


@dataclass(frozen=True)
class D3Params:
    """:param effective_n: Items actually in use; columns 2^q .. beyond it are dropped."""

    q: int
    effective_n: int

    def __post_init__(self):
        if self.q < 2:
            raise InputError(f"The binary-pair design needs q >= 2, got q={self.q}.")
        if not 1 <= self.effective_n <= RADIX**self.q:
            raise InputError(
                f"effective n must be in [1, 2^{self.q}], got {self.effective_n}."
            )

    @property
    def t(self) -> int:
        return d3_test_count(self.q)

    def row(self, p: int, p2: int, v: int, v2: int) -> int:
        """Row of <p, p2, v, v2>; a pair given in descending order maps onto its mirror."""
        if p > p2:
            p, p2, v, v2 = p2, p, v2, v
        pair = p * (2 * self.q - p - 1) // 2 + (p2 - p - 1)
        return 4 * pair + 2 * v + v2

    def to_params_field(self) -> str:
        return f"q={self.q};effn={self.effective_n}"


def d3_params_for(n: int) -> D3Params:
    """The smallest q >= 2 with 2^q >= n."""
    if n < 1:
        raise InputError(f"Need at least one item, got n={n}.")
    q = 2
    while RADIX**q < n:
        q += 1
    return D3Params(q, n)


def build_d3_matrix(q: int, effective_n: int) -> TestMatrix:
    params = D3Params(q, effective_n)
    with ctx.set(
        {EventAttrKey.METHOD: Method.D3, EventAttrKey.Q: q, EventAttrKey.N: effective_n}
    ):
        with _tracer.start_as_current_span(SpanName.CONSTRUCT_D3):
            digits = radix_digits(effective_n, q, RADIX)
            rows = [
                tuple(np.flatnonzero((digits[:, p] == v) & (digits[:, p2] == v2)).tolist())
                for p, p2 in combinations(range(q), 2)
                for v, v2 in _VALUE_PAIRS
            ]
            return TestMatrix(
                n=effective_n, rows=tuple(rows), method=Method.D3, d=3, params=params
            )


class _Probe:
    """test_M lookups on one outcome, plus the quantities derived from them."""

    def __init__(self, o: OutcomeVector, params: D3Params, probes: ProbeCounter):
        self.o = o
        self.params = params
        self.probes = probes

    def m(self, p: int, p2: int, v: int, v2: int) -> int:
        return self.probes.read(self.o, self.params.row(p, p2, v, v2))

    def b(self, p: int, v: int) -> int:
        """1 iff some defective has value v at position p."""
        partner = 1 if p == 0 else 0
        return 1 if self.m(p, partner, v, 0) or self.m(p, partner, v, 1) else 0

    def value_pairs(self, p: int, p2: int) -> List[Tuple[int, int]]:
        """The value pairs the defectives show at positions (p, p2); test2 is its length."""
        return [(v, v2) for v, v2 in _VALUE_PAIRS if self.m(p, p2, v, v2)]


def decode_d3(
    o: OutcomeVector, params: D3Params, probes: Optional[ProbeCounter] = None
) -> DecodeResult:
    """Identifies up to three defectives from the outcome of build_d3_matrix, in O(t).

    Let P be the positions where both digit values occur among the defectives.
    Exactly two defectives are present iff every pair of positions in P shows two
    value pairs. Otherwise some pair (p1, p2) shows three and misses (v1, v2): the
    defective D with v1 at p1 is then unique, as is E with v2 at p2, and the
    remaining F is the other item with 1 - v1 at p1.

    Digit labels of two defectives are arbitrary, so compare results as sets.
    More than three defectives give undefined results.
    """
    if len(o) != params.t:
        raise InputError(
            f"Outcome has {len(o)} results but the q={params.q} design has {params.t} tests."
        )
    probes = probes or ProbeCounter()
    with _tracer.start_as_current_span(SpanName.DECODE_D3, {EventAttrKey.Q: params.q}):
        result = _decode(_Probe(o, params, probes))
        _tracer.add_event(
            EventAttrValue.DECODE_RESULT,
            {EventAttrKey.ITEMS: str(result.items), EventAttrKey.PROBES: probes.probes},
        )
        return result


def _decode(probe: _Probe) -> Identified:
    params = probe.params
    q = params.q
    shared: Dict[int, int] = {}
    ambiguous: List[int] = []
    for p in range(q):
        values = [v for v in range(RADIX) if probe.b(p, v)]
        if not values:
            if p == 0:
                return Identified(DefectiveSet())
            raise ProtocolViolationError(f"No defective digit is positive at position {p}.")
        if len(values) == 1:
            shared[p] = values[0]
        else:
            ambiguous.append(p)

    def digits_with(assigned: Dict[int, int]) -> int:
        return _to_item([shared.get(p, assigned.get(p)) for p in range(q)], params)

    if not ambiguous:
        return Identified(DefectiveSet.of(digits_with({})))

    triple = _find_triple_pair(probe, ambiguous)
    if triple is None:
        anchor = ambiguous[0]
        d = {anchor: 0}
        for p in ambiguous[1:]:
            d[p] = 0 if probe.m(anchor, p, 0, 0) else 1
        e = {p: 1 - v for p, v in d.items()}
        return Identified(DefectiveSet.of(digits_with(d), digits_with(e)))

    (p1, p2), (v1, v2) = triple
    d = {p1: v1, p2: 1 - v2}
    e = {p1: 1 - v1, p2: v2}
    f = {p1: 1 - v1, p2: 1 - v2}
    for p in ambiguous:
        if p in (p1, p2):
            continue
        d[p] = 0 if probe.m(p1, p, v1, 0) else 1
        e[p] = 0 if probe.m(p2, p, v2, 0) else 1
        v = e[p]
        f[p] = 1 - v if probe.m(p1, p, 1 - v1, 1 - v) else v
    return Identified(DefectiveSet.of(digits_with(d), digits_with(e), digits_with(f)))


def _find_triple_pair(
    probe: _Probe, ambiguous: List[int]
) -> Optional[Tuple[Tuple[int, int], Tuple[int, int]]]:
    """The first position pair showing three value pairs, and the missing value pair."""
    for p1, p2 in combinations(ambiguous, 2):
        present = probe.value_pairs(p1, p2)
        if len(present) == 3:
            missing = next(pair for pair in _VALUE_PAIRS if pair not in present)
            return (p1, p2), missing
        if len(present) == 4:
            raise ProtocolViolationError(
                f"All four value pairs occur at positions ({p1}, {p2}):"
                " more than three defectives."
            )
    return None


def _to_item(digits: List[int], params: D3Params) -> int:
    item = 0
    for digit in reversed(digits):
        item = item * RADIX + digit
    if item >= params.effective_n:
        raise ProtocolViolationError(
            f"Outcome decodes to item {item}, beyond the {params.effective_n} items in use."
        )
    return item
