"""Reading and writing CGT1 matrix files and outcome files.

A CGT1 file is UTF-8 text:

    CGT1
    method=crs
    n=100 t=41 d=2
    params=primepowers=2,3,5,7,11,13
    0 2 4 6 ...          <- one line per test: its sorted item indices

The params line is method specific:

    crs     primepowers=2^2,3^2,5,7,11
    rw      tparam=36;k=2;seed=12345;gen=numpy-pcg64
    d2, d3  q=5;effn=100
    custom  (empty)

An empty row line is an empty test. CRS moduli above n, rake-and-winnow rows no
item was injected into, and radix designs truncated below radix^q all produce them.

An outcome file is a single line of t characters over {0, 1}.
"""
from pathlib import Path
from typing import Dict, List, Union

from form_group_testing.binary_pairs import D3Params
from form_group_testing.crs import PrimePowerPlan
from form_group_testing.errors import InputError
from form_group_testing.matrix import OutcomeVector, TestMatrix
from form_group_testing.otel_value import Method
from form_group_testing.rake_winnow import RWParams
from form_group_testing.ternary import D2Params

MAGIC = "CGT1"
_HEADER_LINES = 4

PathLike = Union[str, Path]


def params_field(m: TestMatrix) -> str:
    if m.params is None:
        return ""
    return m.params.to_params_field()


def dumps_matrix(m: TestMatrix) -> str:
    lines = [
        MAGIC,
        f"method={m.method}",
        f"n={m.n} t={m.t} d={m.d}",
        f"params={params_field(m)}",
    ]
    lines.extend(" ".join(str(j) for j in row) for row in m.rows)
    return "\n".join(lines) + "\n"


def write_matrix(m: TestMatrix, path: PathLike) -> None:
    Path(path).write_text(dumps_matrix(m), encoding="utf-8")


def _key_values(text: str, separator: str, line: int) -> Dict[str, str]:
    fields = {}
    for item in filter(None, (s.strip() for s in text.split(separator))):
        key, eq, value = item.partition("=")
        if not eq or not key:
            raise InputError(f"Expected key=value, got {item!r}.", line=line)
        if key in fields:
            raise InputError(f"Duplicate key {key!r}.", line=line)
        fields[key] = value
    return fields


def _int_field(fields: Dict[str, str], key: str, line: int) -> int:
    if key not in fields:
        raise InputError(f"Missing {key}=.", line=line)
    try:
        return int(fields[key])
    except ValueError:
        raise InputError(
            f"{key} must be an integer, got {fields[key]!r}.", line=line
        ) from None


def _expect_keys(fields: Dict[str, str], keys, line: int) -> None:
    unknown = set(fields) - set(keys)
    if unknown:
        raise InputError(f"Unexpected keys {sorted(unknown)}.", line=line)


def parse_params(method: str, text: str, n: int, t: int, d: int):
    """Builds the construction parameters of a matrix from its params= field."""
    line = 4
    if method == Method.CUSTOM:
        if text.strip():
            raise InputError(f"Custom matrices take no params, got {text!r}.", line=line)
        return None
    if method == Method.CRS:
        key, eq, value = text.partition("=")
        if key != "primepowers" or not eq:
            raise InputError(f"Expected primepowers=..., got {text!r}.", line=line)
        params = PrimePowerPlan.from_tokens(value, n=n, d=d)
        expected_t = params.cost
    elif method == Method.RW:
        fields = _key_values(text, ";", line)
        _expect_keys(fields, ("tparam", "k", "seed", "gen"), line)
        if "gen" not in fields:
            raise InputError("Missing gen=.", line=line)
        params = RWParams(
            n=n,
            d=d,
            k=_int_field(fields, "k", line),
            tparam=_int_field(fields, "tparam", line),
            seed=_int_field(fields, "seed", line),
            generator=fields["gen"],
        )
        expected_t = params.rows
    elif method in (Method.D2, Method.D3):
        fields = _key_values(text, ";", line)
        _expect_keys(fields, ("q", "effn"), line)
        params_type = D2Params if method == Method.D2 else D3Params
        params = params_type(_int_field(fields, "q", line), _int_field(fields, "effn", line))
        if params.effective_n != n:
            raise InputError(
                f"effn={params.effective_n} does not match n={n}.", line=line
            )
        expected_t = params.t
    else:
        raise InputError(f"Unknown method {method!r}, expected one of {Method.ALL}.", line=2)
    if expected_t != t:
        raise InputError(f"params imply t={expected_t} but the header says t={t}.", line=line)
    return params


def _parse_row(text: str, line: int) -> List[int]:
    try:
        return [int(token) for token in text.split()]
    except ValueError:
        raise InputError(
            f"Row must be space-separated integers, got {text!r}.", line=line
        ) from None


def loads_matrix(text: str) -> TestMatrix:
    lines = text.splitlines()
    if len(lines) < _HEADER_LINES:
        raise InputError(f"A CGT1 file has at least {_HEADER_LINES} header lines.")
    if lines[0].strip() != MAGIC:
        raise InputError(f"Expected {MAGIC!r}, got {lines[0]!r}.", line=1)

    key, eq, method = lines[1].strip().partition("=")
    if key != "method" or not eq:
        raise InputError(f"Expected method=..., got {lines[1]!r}.", line=2)

    sizes = _key_values(lines[2], " ", 3)
    _expect_keys(sizes, ("n", "t", "d"), 3)
    n, t, d = (_int_field(sizes, key, 3) for key in ("n", "t", "d"))

    key, eq, raw_params = lines[3].strip().partition("=")
    if key != "params" or not eq:
        raise InputError(f"Expected params=..., got {lines[3]!r}.", line=4)
    params = parse_params(method, raw_params, n, t, d)

    body = lines[_HEADER_LINES:]
    if len(body) < t:
        raise InputError(f"Header says t={t} but only {len(body)} rows follow.")
    for offset, extra in enumerate(body[t:], start=_HEADER_LINES + t + 1):
        if extra.strip():
            raise InputError("Unexpected content after the last row.", line=offset)
    rows = []
    for offset, row_text in enumerate(body[:t], start=_HEADER_LINES + 1):
        row = _parse_row(row_text, offset)
        if any(j < 0 or j >= n for j in row) or row != sorted(set(row)):
            raise InputError(
                f"Row must hold strictly increasing indices in [0, {n}).", line=offset
            )
        rows.append(tuple(row))
    return TestMatrix(n=n, rows=tuple(rows), method=method, d=d, params=params)


def read_matrix(path: PathLike) -> TestMatrix:
    return loads_matrix(Path(path).read_text(encoding="utf-8"))


def dumps_outcome(o: OutcomeVector) -> str:
    return f"{o}\n"


def write_outcome(o: OutcomeVector, path: PathLike) -> None:
    Path(path).write_text(dumps_outcome(o), encoding="utf-8")


def loads_outcome(text: str) -> OutcomeVector:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) > 1:
        raise InputError(f"An outcome file holds one line, got {len(lines)}.")
    return OutcomeVector.from_string(lines[0] if lines else "")


def read_outcome(path: PathLike) -> OutcomeVector:
    return loads_outcome(Path(path).read_text(encoding="utf-8"))
