"""Brute-force property verifiers, used as oracles for every construction.

These enumerate column subsets, so they are exponential in d. Instances above
the configured limits (Settings.max_verify_n, Settings.max_verify_subsets) are
refused unless force=True.
"""
from itertools import combinations
from math import comb
import logging
from typing import Dict, Optional, Tuple

from bitarray import frozenbitarray
from bitarray.util import zeros

from form_group_testing.config import Settings
from form_group_testing.context_aware import ContextAwareTracer
from form_group_testing.errors import GuardExceededError, InputError, ProtocolViolationError
from form_group_testing.matrix import (
    DefectiveSet,
    Identified,
    OutcomeVector,
    TestMatrix,
)
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, SpanName

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)

Subset = Tuple[int, ...]


def _check_d(m: TestMatrix, d: int) -> None:
    if d < 1 or d >= m.n:
        raise InputError(f"Verification needs 1 <= d < n, got d={d} with n={m.n}.")


def guard(
    m: TestMatrix, subsets: int, force: bool, settings: Optional[Settings] = None
) -> None:
    """Refuses instances whose enumeration would be accidentally huge."""
    if force:
        return
    settings = settings or Settings.from_env()
    if m.n > settings.max_verify_n:
        raise GuardExceededError(
            f"n={m.n} exceeds the brute-force limit of {settings.max_verify_n} items;"
            " pass --force (force=True) to run anyway."
        )
    if subsets > settings.max_verify_subsets:
        raise GuardExceededError(
            f"{subsets} subsets exceed the brute-force limit of"
            f" {settings.max_verify_subsets}; pass --force (force=True) to run anyway."
        )


def _union(m: TestMatrix, subset: Subset):
    u = zeros(m.t)
    for j in subset:
        u |= m.column_masks[j]
    return u


def iter_indistinguishable(m: TestMatrix, subset: Subset):
    """Yields the columns outside `subset` that no row separates from it.

    Column j is distinguishable from D when some row has a 1 in j and 0 in all of D;
    that row's negative outcome would clear j.
    """
    outside = ~_union(m, subset)
    members = set(subset)
    for j, column in enumerate(m.column_masks):
        if j not in members and not (column & outside).any():
            yield j


def find_disjunct_violation(
    m: TestMatrix, d: int, force: bool = False
) -> Optional[Tuple[Subset, int]]:
    """First (D, j) with |D| = d and column j covered by the Boolean sum of D."""
    _check_d(m, d)
    subsets = comb(m.n, d)
    guard(m, subsets, force)
    with _tracer.start_as_current_span(
        SpanName.VERIFY_DISJUNCT, {EventAttrKey.D: d, EventAttrKey.SUBSETS: subsets}
    ):
        for subset in combinations(range(m.n), d):
            for j in iter_indistinguishable(m, subset):
                _record_counterexample(subset, j)
                return subset, j
    return None


def is_d_disjunct(m: TestMatrix, d: int, force: bool = False) -> bool:
    """True iff no column is covered by the Boolean sum of any d other columns."""
    return find_disjunct_violation(m, d, force) is None


def find_resolvability_violation(
    m: TestMatrix, d: int, k: int, force: bool = False
) -> Optional[Tuple[Subset, Tuple[int, ...]]]:
    """First d-subset D with at least k columns outside D indistinguishable from D."""
    _check_d(m, d)
    if k < 1:
        raise InputError(f"Resolvability slack k must be at least 1, got {k}.")
    subsets = comb(m.n, d)
    guard(m, subsets, force)
    with _tracer.start_as_current_span(
        SpanName.VERIFY_RESOLVABLE,
        {EventAttrKey.D: d, EventAttrKey.K: k, EventAttrKey.SUBSETS: subsets},
    ):
        for subset in combinations(range(m.n), d):
            hidden = []
            for j in iter_indistinguishable(m, subset):
                hidden.append(j)
                if len(hidden) >= k:
                    _record_counterexample(subset, tuple(hidden))
                    return subset, tuple(hidden)
    return None


def _subset_count_upto(n: int, d: int) -> int:
    return sum(comb(n, s) for s in range(d + 1))


def find_separability_violation(
    m: TestMatrix, d: int, force: bool = False
) -> Optional[Tuple[Subset, Subset]]:
    """First pair of distinct subsets of size <= d with the same Boolean sum."""
    _check_d(m, d)
    subsets = _subset_count_upto(m.n, d)
    guard(m, subsets, force)
    with _tracer.start_as_current_span(
        SpanName.VERIFY_SEPARABLE, {EventAttrKey.D: d, EventAttrKey.SUBSETS: subsets}
    ):
        seen: Dict[frozenbitarray, Subset] = {}
        for size in range(d + 1):
            for subset in combinations(range(m.n), size):
                signature = frozenbitarray(_union(m, subset))
                previous = seen.get(signature)
                if previous is not None:
                    _record_counterexample(previous, subset)
                    return previous, subset
                seen[signature] = subset
    return None


def is_separable_upto(m: TestMatrix, d: int, force: bool = False) -> bool:
    """True iff the Boolean sums of all column subsets of size <= d are distinct."""
    return find_separability_violation(m, d, force) is None


def decode_separable(
    m: TestMatrix, o: OutcomeVector, d: int, force: bool = False
) -> Identified:
    """Generic decoder for d-bar-separable matrices, by exhaustive matching.

    Returns the first subset of size <= d (smallest first) whose induced positive
    tests equal the outcome. Theta(n^d), so it is guarded like the verifiers.
    """
    if len(o) != m.t:
        raise InputError(f"Outcome has {len(o)} results but the matrix has {m.t} tests.")
    if d < 0 or d >= m.n:
        raise InputError(f"Decoding needs 0 <= d < n, got d={d} with n={m.n}.")
    guard(m, _subset_count_upto(m.n, d), force)
    with _tracer.start_as_current_span(SpanName.DECODE_SEPARABLE, {EventAttrKey.D: d}):
        for size in range(d + 1):
            for subset in combinations(range(m.n), size):
                if _union(m, subset) == o.bits:
                    return Identified(DefectiveSet(subset))
    raise ProtocolViolationError(
        f"No set of at most {d} defectives produces outcome {o}."
    )


def _record_counterexample(first, second) -> None:
    _log.info("Counterexample: %s against %s", first, second)
    _tracer.add_event(
        EventAttrValue.VERIFY_COUNTEREXAMPLE,
        {EventAttrKey.COUNTEREXAMPLE: f"{list(first)} / {second}"},
    )
