"""Ternary pooling design for up to two defectives, with an O(t) decoder.

Items are written with q base-3 digits X_0 .. X_{q-1} (X_0 least significant).
The matrix stacks two row families:

* B, 3q rows: row <p, v> = 3p + v pools the items with X_p = v.
* C, q(q-1)/2 rows: row <p, p'> (p < p', lexicographic) pools the items with
  X_p = X_p'.

t = (q^2 + 5q) / 2.
"""
from dataclasses import dataclass
from typing import List, Optional

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

RADIX = 3


def d2_test_count(q: int) -> int:
    if q < 1:
        raise InputError(f"The ternary design needs q >= 1, got q={q}.")
    return (q * q + 5 * q) // 2


def _pair_index(p: int, p2: int, q: int) -> int:
    """Position of <p, p2> (p < p2) among all pairs in lexicographic order."""
    return p * (2 * q - p - 1) // 2 + (p2 - p - 1)


@dataclass(frozen=True)
class D2Params:
    """:param effective_n: Items actually in use; columns 3^q .. beyond it are dropped."""

    q: int
    effective_n: int

    def __post_init__(self):
        if self.q < 1:
            raise InputError(f"The ternary design needs q >= 1, got q={self.q}.")
        if not 1 <= self.effective_n <= RADIX**self.q:
            raise InputError(
                f"effective n must be in [1, 3^{self.q}], got {self.effective_n}."
            )

    @property
    def t(self) -> int:
        return d2_test_count(self.q)

    def b_row(self, p: int, v: int) -> int:
        return RADIX * p + v

    def c_row(self, p: int, p2: int) -> int:
        return RADIX * self.q + _pair_index(p, p2, self.q)

    def to_params_field(self) -> str:
        return f"q={self.q};effn={self.effective_n}"


def d2_params_for(n: int) -> D2Params:
    """The smallest q with 3^q >= n."""
    if n < 1:
        raise InputError(f"Need at least one item, got n={n}.")
    q = 1
    while RADIX**q < n:
        q += 1
    return D2Params(q, n)


def build_d2_matrix(q: int, effective_n: int) -> TestMatrix:
    params = D2Params(q, effective_n)
    with ctx.set(
        {EventAttrKey.METHOD: Method.D2, EventAttrKey.Q: q, EventAttrKey.N: effective_n}
    ):
        with _tracer.start_as_current_span(SpanName.CONSTRUCT_D2):
            digits = radix_digits(effective_n, q, RADIX)
            rows = [
                np.flatnonzero(digits[:, p] == v).tolist()
                for p in range(q)
                for v in range(RADIX)
            ]
            rows.extend(
                np.flatnonzero(digits[:, p] == digits[:, p2]).tolist()
                for p in range(q)
                for p2 in range(p + 1, q)
            )
            return TestMatrix(
                n=effective_n,
                rows=tuple(map(tuple, rows)),
                method=Method.D2,
                d=2,
                params=params,
            )


def _to_item(digits: List[int], params: D2Params) -> int:
    item = 0
    for digit in reversed(digits):
        item = item * RADIX + digit
    if item >= params.effective_n:
        raise ProtocolViolationError(
            f"Outcome decodes to item {item}, beyond the {params.effective_n} items in use."
        )
    return item


def decode_d2(
    o: OutcomeVector, params: D2Params, probes: Optional[ProbeCounter] = None
) -> DecodeResult:
    """Identifies up to two defectives from the outcome of build_d2_matrix, in O(t).

    Per position p, test1(p) counts the values v with a positive B row <p, v>. The
    first position where the defectives D and E differ, p*, fixes which of them is
    which: D takes the smaller value v1* there and E the larger v2*. At every later
    differing position with values {v1, v2}, the C row <p*, p> is positive iff
    D_p = v1* or E_p = v2*. As the two value pairs share at least one value:

    * if v1* is among {v1, v2}, D_p = v1* iff C is positive;
    * otherwise v2* is, and E_p = v2* iff C is positive.

    More than two defectives give undefined results.
    """
    if len(o) != params.t:
        raise InputError(
            f"Outcome has {len(o)} results but the q={params.q} design has {params.t} tests."
        )
    probes = probes or ProbeCounter()
    with _tracer.start_as_current_span(SpanName.DECODE_D2, {EventAttrKey.Q: params.q}):
        result = _decode(o, params, probes)
        _tracer.add_event(
            EventAttrValue.DECODE_RESULT,
            {EventAttrKey.ITEMS: str(result.items), EventAttrKey.PROBES: probes.probes},
        )
        return result


def _decode(o: OutcomeVector, params: D2Params, probes: ProbeCounter) -> Identified:
    d_digits: List[int] = []
    e_digits: List[int] = []
    anchor = -1
    anchor_d = anchor_e = -1
    for p in range(params.q):
        values = [v for v in range(RADIX) if probes.read(o, params.b_row(p, v))]
        if not values:
            if p == 0:
                return Identified(DefectiveSet())
            raise ProtocolViolationError(f"No B test is positive at digit {p}.")
        if len(values) == 1:
            d_digits.append(values[0])
            e_digits.append(values[0])
            continue
        if len(values) > 2:
            raise ProtocolViolationError(
                f"All three values are positive at digit {p}: more than two defectives."
            )
        v1, v2 = values
        if anchor < 0:
            anchor, anchor_d, anchor_e = p, v1, v2
            d_digits.append(v1)
            e_digits.append(v2)
            continue
        agrees = probes.read(o, params.c_row(anchor, p))
        if anchor_d in values:
            d_value = anchor_d if agrees else (v2 if anchor_d == v1 else v1)
            e_value = v2 if d_value == v1 else v1
        else:
            e_value = anchor_e if agrees else (v2 if anchor_e == v1 else v1)
            d_value = v2 if e_value == v1 else v1
        d_digits.append(d_value)
        e_digits.append(e_value)

    if anchor < 0:
        return Identified(DefectiveSet.of(_to_item(d_digits, params)))
    return Identified(DefectiveSet.of(_to_item(d_digits, params), _to_item(e_digits, params)))
