"""Test counts of competing designs, and the comparison tables.

Only the closed-form counts of the competing schemes are implemented, not their
constructions:

*   hs: a random-coding bound, 16 d^2 (1 + log_3 2 + log_3 2 lg n), rounded to the
    nearest integer.
*   mr: a 2-disjunct design with t = (q^2 + 3q)/2 for n = 2^q - 1.
*   ks: a 2-disjunct concatenated code with t = 3^(q+1) for n = 3^(2^q).
*   dh3: a 3-disjunct design with t = 18q^2 - 6q for n = 2^q - 1.

The toolkit's own designs contribute d2, d3 (their q formulas at the smallest q
covering n), crs (all exponents 1), crs-bt (optimized exponents) and rw (the 2t
stage-1 pooled tests of rake-and-winnow, without stage 2).
"""
import csv
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
import io
import logging
import math
from pathlib import Path
import re
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence

from form_group_testing.binary_pairs import d3_params_for
from form_group_testing.context_aware import ContextAwareTracer, ctx
from form_group_testing.crs import backtrack_plan, select_prime_plan
from form_group_testing.errors import InputError
from form_group_testing.otel_value import EventAttrKey, SpanName, TableMethod
from form_group_testing.rake_winnow import stage1_test_count
from form_group_testing.ternary import d2_params_for
from form_group_testing.timing import timed

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)

FIXTURE_DIR = Path(__file__).parent / "fixtures"

LOG3_2 = math.log(2, 3)

_POWER = re.compile(r"^(\d+)\^(\d+)$")
_SCIENTIFIC = re.compile(r"^\d+(\.\d+)?[eE]\+?\d+$")


def parse_count(text: str) -> int:
    """Parses '100', '1e30', '2.5e3' or '3^63' to an exact integer."""
    text = text.strip().replace("_", "")
    if text.isdigit():
        return int(text)
    power = _POWER.match(text)
    if power:
        return int(power.group(1)) ** int(power.group(2))
    if _SCIENTIFIC.match(text):
        try:
            value = Decimal(text)
        except InvalidOperation:
            raise InputError(f"Bad number {text!r}.") from None
        if value != value.to_integral_value():
            raise InputError(f"{text!r} is not an integer.")
        return int(value)
    raise InputError(f"Bad number {text!r}; use digits, 1e30 or 3^63 forms.")


def format_count(n: int) -> str:
    """Compact rendering of table n values: 10^k as 1ek, 3^k as 3^k, else digits."""
    if n >= 10**4:
        k = len(str(n)) - 1
        if n == 10**k:
            return f"1e{k}"
        k = round(math.log(n, 3))
        if n == 3**k:
            return f"3^{k}"
    return str(n)


def hs_bound(n: int, d: int) -> int:
    if n < 2 or d < 1:
        raise InputError(f"The HS bound needs n >= 2 and d >= 1, got n={n}, d={d}.")
    return math.floor(16 * d * d * (1 + LOG3_2 + LOG3_2 * math.log2(n)) + 0.5)


def _mersenne_q(n: int) -> int:
    """The smallest q with 2^q - 1 >= n."""
    return n.bit_length()


def mr_bound(n: int) -> int:
    if n < 1:
        raise InputError(f"Need n >= 1, got {n}.")
    q = _mersenne_q(n)
    return (q * q + 3 * q) // 2


def ks_bound(n: int) -> int:
    if n < 3:
        raise InputError(f"The KS count needs n >= 3, got {n}.")
    q = 1
    while 3 ** (2**q) < n:
        q += 1
    return 3 ** (q + 1)


def dh3_bound(n: int) -> int:
    if n < 1:
        raise InputError(f"Need n >= 1, got {n}.")
    q = _mersenne_q(n)
    return 18 * q * q - 6 * q


def crs_test_count(n: int, d: int) -> int:
    return select_prime_plan(n, d).cost


def crs_bt_test_count(n: int, d: int) -> int:
    return backtrack_plan(n, d).cost


def rw_test_count(n: int, d: int) -> int:
    return 2 * stage1_test_count(n, d, d)


def d2_count(n: int) -> int:
    return d2_params_for(n).t


def d3_count(n: int) -> int:
    return d3_params_for(n).t


_COUNTS = {
    TableMethod.D2: lambda n, d: d2_count(n),
    TableMethod.D3: lambda n, d: d3_count(n),
    TableMethod.CRS: crs_test_count,
    TableMethod.CRS_BT: crs_bt_test_count,
    TableMethod.RW: rw_test_count,
    TableMethod.MR: lambda n, d: mr_bound(n),
    TableMethod.KS: lambda n, d: ks_bound(n),
    TableMethod.HS: hs_bound,
    TableMethod.DH3: lambda n, d: dh3_bound(n),
}

#: Methods that only apply at one d.
_ONLY_AT = {
    TableMethod.D2: 2,
    TableMethod.MR: 2,
    TableMethod.KS: 2,
    TableMethod.D3: 3,
    TableMethod.DH3: 3,
}


def default_methods(d: int) -> List[str]:
    if d == 2:
        return [
            TableMethod.D2,
            TableMethod.CRS_BT,
            TableMethod.CRS,
            TableMethod.RW,
            TableMethod.MR,
            TableMethod.KS,
            TableMethod.HS,
        ]
    if d == 3:
        return [
            TableMethod.CRS_BT,
            TableMethod.CRS,
            TableMethod.D3,
            TableMethod.RW,
            TableMethod.HS,
            TableMethod.DH3,
        ]
    return [TableMethod.CRS_BT, TableMethod.CRS, TableMethod.RW, TableMethod.HS]


def check_methods(d: int, methods: Sequence[str]) -> None:
    for method in methods:
        if method not in _COUNTS:
            raise InputError(f"Unknown method {method!r}, expected one of {TableMethod.ALL}.")
        only = _ONLY_AT.get(method)
        if only is not None and only != d:
            raise InputError(f"Method {method} only applies at d={only}, not d={d}.")


class ComparisonRow(NamedTuple):
    n: int
    counts: Dict[str, int]


def comparison_table(
    d: int, n_list: Sequence[int], methods: Optional[Sequence[str]] = None
) -> List[ComparisonRow]:
    methods = list(methods or default_methods(d))
    check_methods(d, methods)
    for n in n_list:
        if d >= n:
            raise InputError(f"Need d < n, got n={n}, d={d}.")
    with ctx.set({EventAttrKey.D: d}):
        with _tracer.start_as_current_span(SpanName.COMPARE), timed("compare.table"):
            return [
                ComparisonRow(n, {method: _COUNTS[method](n, d) for method in methods})
                for n in n_list
            ]


def render_text(rows: Sequence[ComparisonRow], methods: Sequence[str]) -> str:
    """Right-aligned columns, one line per n, header first."""
    table = [["n", *methods]]
    table.extend([format_count(row.n), *(str(row.counts[m]) for m in methods)] for row in rows)
    widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
    return "".join(
        "  ".join(cell.rjust(width) for cell, width in zip(line, widths)).rstrip() + "\n"
        for line in table
    )


def render_csv(rows: Sequence[ComparisonRow], methods: Sequence[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", *methods])
    for row in rows:
        writer.writerow([format_count(row.n), *(row.counts[m] for m in methods)])
    return out.getvalue()


#: d -> n -> method -> published count.
Fixtures = Dict[int, Dict[int, Dict[str, int]]]

_FIXTURE_NAME = re.compile(r"^d(\d+)_.*\.csv$")


def load_fixtures(directory: Path = FIXTURE_DIR) -> Fixtures:
    """Reads every d<d>_<table>.csv fixture; blank cells are unpublished values."""
    fixtures: Fixtures = {}
    for path in sorted(directory.glob("d*.csv")):
        match = _FIXTURE_NAME.match(path.name)
        if not match:
            continue
        by_n = fixtures.setdefault(int(match.group(1)), {})
        with path.open(newline="", encoding="utf-8") as f:
            for record in csv.DictReader(f):
                n = parse_count(record.pop("n"))
                counts = by_n.setdefault(n, {})
                counts.update({m: int(v) for m, v in record.items() if v and v.strip()})
    return fixtures


@dataclass(frozen=True)
class FixtureMismatch:
    n: int
    method: str
    expected: int
    actual: int

    def __str__(self) -> str:
        return (
            f"n={format_count(self.n)} {self.method}: expected {self.expected},"
            f" got {self.actual}"
        )


def diff_fixtures(
    rows: Sequence[ComparisonRow], expected: Mapping[int, Mapping[str, int]]
) -> List[FixtureMismatch]:
    """Cells present both in rows and in the fixtures for the same d that disagree."""
    mismatches = []
    for row in rows:
        for method, actual in row.counts.items():
            want = expected.get(row.n, {}).get(method)
            if want is not None and want != actual:
                mismatches.append(FixtureMismatch(row.n, method, want, actual))
    return mismatches


def hs_crossover_exponent(d: int, max_exponent: int = 120) -> Optional[int]:
    """Largest k <= max_exponent with crs(10^k, d) <= hs(10^k, d), or None."""
    last = None
    for k in range(1, max_exponent + 1):
        n = 10**k
        if n <= d:
            continue
        if crs_test_count(n, d) <= hs_bound(n, d):
            last = k
    _log.debug("CRS stays within the HS count up to n = 1e%s at d=%d", last, d)
    return last
