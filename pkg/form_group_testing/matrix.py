"""Test matrices, outcome vectors and the generic disjunct-matrix decoder.

A test regimen is a t x n Boolean matrix: rows are tests (pools), columns are
items. Rows are stored sparsely as sorted column index tuples; dense bit views
(`column_masks`, `row_complements`) are derived lazily for decoding and
verification speed.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

from bitarray import bitarray, frozenbitarray
from bitarray.util import zeros
import numpy as np

from form_group_testing.context_aware import ContextAwareTracer
from form_group_testing.errors import InputError
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method

_tracer = ContextAwareTracer(__name__)


def ones_indices(bits: bitarray) -> List[int]:
    """Ascending positions of the 1 bits."""
    found = []
    start = 0
    for _ in range(bits.count()):
        start = bits.index(1, start)
        found.append(start)
        start += 1
    return found


@dataclass(frozen=True)
class TestMatrix:
    """A t x n test regimen plus the metadata of the construction that built it.

    :param n: Number of items (columns).
    :param rows: For each test, the strictly increasing item indices it pools.
    :param method: One of the Method tags.
    :param d: The number of defectives the design is declared to handle.
    :param params: The construction's parameters (PrimePowerPlan, RWParams,
        D2Params, D3Params), or None for custom matrices.
    """

    # Keep pytest from collecting this class from test modules that import it.
    __test__ = False

    n: int
    rows: Tuple[Tuple[int, ...], ...]
    method: str = Method.CUSTOM
    d: int = 1
    params: Any = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"A test matrix needs at least one item, got n={self.n}.")
        if self.method not in Method.ALL:
            raise InputError(f"Unknown method {self.method!r}, expected one of {Method.ALL}.")
        object.__setattr__(self, "rows", tuple(tuple(row) for row in self.rows))
        for i, row in enumerate(self.rows):
            previous = -1
            for j in row:
                if not 0 <= j < self.n:
                    raise InputError(f"Row {i} has column {j} outside [0, {self.n}).")
                if j <= previous:
                    raise InputError(f"Row {i} is not strictly increasing at column {j}.")
                previous = j

    @property
    def t(self) -> int:
        return len(self.rows)

    @cached_property
    def column_masks(self) -> Tuple[frozenbitarray, ...]:
        """For each item, the length-t bit mask of the tests containing it."""
        columns = [zeros(self.t) for _ in range(self.n)]
        for i, row in enumerate(self.rows):
            for j in row:
                columns[j][i] = 1
        return tuple(frozenbitarray(c) for c in columns)

    @cached_property
    def row_complements(self) -> Tuple[frozenbitarray, ...]:
        """For each test, the length-n mask of the items it does NOT contain."""
        complements = []
        for row in self.rows:
            mask = bitarray(self.n)
            mask.setall(1)
            for j in row:
                mask[j] = 0
            complements.append(frozenbitarray(mask))
        return tuple(complements)

    def column(self, j: int) -> List[int]:
        """Ascending indices of the tests containing item j."""
        if not 0 <= j < self.n:
            raise InputError(f"Item {j} outside [0, {self.n}).")
        return ones_indices(self.column_masks[j])


@dataclass(frozen=True)
class OutcomeVector:
    """Results of running every test of a matrix; bit i is 1 iff test i is positive."""

    bits: frozenbitarray

    @classmethod
    def from_iterable(cls, values: Iterable[Union[int, bool]]) -> "OutcomeVector":
        return cls(frozenbitarray([1 if v else 0 for v in values]))

    @classmethod
    def from_string(cls, text: str) -> "OutcomeVector":
        text = text.strip()
        if any(c not in "01" for c in text):
            raise InputError(f"Outcomes must be a string over {{0,1}}, got {text!r}.")
        return cls(frozenbitarray(text))

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def __str__(self) -> str:
        return self.bits.to01()

    def positives(self) -> int:
        return self.bits.count()


@dataclass(frozen=True)
class DefectiveSet:
    """A sorted set of distinct item indices."""

    items: Tuple[int, ...] = ()

    def __post_init__(self):
        items = tuple(sorted(set(int(i) for i in self.items)))
        if items and items[0] < 0:
            raise InputError(f"Item indices must be non-negative, got {items[0]}.")
        object.__setattr__(self, "items", items)

    @classmethod
    def of(cls, *items: int) -> "DefectiveSet":
        return cls(tuple(items))

    def check_within(self, n: int) -> None:
        if self.items and self.items[-1] >= n:
            raise InputError(f"Defective item {self.items[-1]} outside [0, {n}).")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __contains__(self, item: int) -> bool:
        return item in self.items

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.items) + "}"


@dataclass(frozen=True)
class Identified:
    """Decoding identified the defective set exactly."""

    items: DefectiveSet


@dataclass(frozen=True)
class Overflow:
    """More than d items survived elimination, so at least d+1 are defective."""

    count: int


@dataclass(frozen=True)
class Candidates:
    """A superset of the defectives, awaiting individual confirmation tests."""

    items: DefectiveSet


DecodeResult = Union[Identified, Overflow, Candidates]


def describe_result(result: DecodeResult) -> str:
    if isinstance(result, Identified):
        return f"identified {result.items}"
    if isinstance(result, Overflow):
        return f"overflow: {result.count} items survive"
    return f"candidates {result.items}"


class ProbeCounter:
    """Counts the outcome lookups a decoder makes.

    Pass one to decode_d2/decode_d3 to check that decoding work stays O(t).
    """

    def __init__(self):
        self.probes = 0

    def read(self, o: OutcomeVector, row: int) -> int:
        self.probes += 1
        return o.bits[row]


def run_tests(m: TestMatrix, defectives: DefectiveSet) -> OutcomeVector:
    """Outcome of every test of m when exactly `defectives` are defective."""
    defectives.check_within(m.n)
    positive = zeros(m.t)
    for j in defectives:
        positive |= m.column_masks[j]
    return OutcomeVector(frozenbitarray(positive))


def _check_length(m: TestMatrix, o: OutcomeVector) -> None:
    if len(o) != m.t:
        raise InputError(f"Outcome has {len(o)} results but the matrix has {m.t} tests.")


def survivors(m: TestMatrix, o: OutcomeVector) -> bitarray:
    """Items not cleared by any negative test (length-n mask)."""
    _check_length(m, o)
    alive = bitarray(m.n)
    alive.setall(1)
    complements = m.row_complements
    for i, positive in enumerate(o.bits):
        if not positive:
            alive &= complements[i]
    return alive


def decode_disjunct(m: TestMatrix, o: OutcomeVector, d: int) -> DecodeResult:
    """Negative elimination: every item in a negative test is good.

    On a d-disjunct matrix with at most d defectives the survivors are exactly the
    defectives; more than d survivors means at least d+1 defectives.
    """
    alive = survivors(m, o)
    count = alive.count()
    if count > d:
        result = Overflow(count)
    else:
        result = Identified(DefectiveSet(tuple(ones_indices(alive))))
    _tracer.add_event(
        EventAttrValue.DECODE_RESULT,
        {EventAttrKey.RESULT: type(result).__name__, EventAttrKey.CANDIDATES: count},
    )
    return result


def radix_digits(n: int, q: int, radix: int) -> np.ndarray:
    """(n, q) array of the base-`radix` digits of items 0 .. n-1, least significant first."""
    weights = radix ** np.arange(q, dtype=np.int64)
    return (np.arange(n, dtype=np.int64)[:, None] // weights) % radix


def sampling_rate(m: TestMatrix) -> int:
    """The most tests any single item takes part in."""
    return max(mask.count() for mask in m.column_masks)


def identity_matrix(n: int) -> TestMatrix:
    """Individual testing: row i pools only item i."""
    return TestMatrix(n=n, rows=tuple((i,) for i in range(n)), d=max(n - 1, 1))


def matrix_from_columns(
    n: int, columns: Sequence[Sequence[int]], t: int, **kwargs
) -> TestMatrix:
    """Builds a matrix from per-item row lists (column-wise constructions)."""
    rows: List[List[int]] = [[] for _ in range(t)]
    for j, column in enumerate(columns):
        for i in column:
            if not 0 <= i < t:
                raise InputError(f"Column {j} uses row {i} outside [0, {t}).")
            rows[i].append(j)
    return TestMatrix(n=n, rows=tuple(tuple(r) for r in rows), **kwargs)


def single_pool_matrix(n: int, d: Optional[int] = None) -> TestMatrix:
    """One test pooling every item."""
    return TestMatrix(n=n, rows=(tuple(range(n)),), d=d or 1)
