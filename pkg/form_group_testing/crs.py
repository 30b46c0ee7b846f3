"""Chinese Remainder Sieve: d-disjunct matrices from residue classes.

Pick prime powers p_j^e_j (distinct primes) whose product is at least n^d. For
each modulus m_j = p_j^e_j and each residue x < m_j, one test pools the items
i < n with i = x (mod m_j). If every test containing item i is positive, some
single defective agrees with i modulo a product of moduli that is >= n, so by
the Chinese Remainder Theorem it is i itself. The matrix is therefore
d-disjunct, and decode_disjunct identifies up to d defectives.

All products and n^d are exact Python integers.
"""
from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from form_group_testing.context_aware import ContextAwareTracer, ctx
from form_group_testing.errors import InputError, NoSolutionError
from form_group_testing.matrix import TestMatrix
from form_group_testing.otel_value import EventAttrKey, EventAttrValue, Method, SpanName
from form_group_testing.primes import prime_sum, primes_stream

_log = logging.getLogger(__name__)
_tracer = ContextAwareTracer(__name__)

#: Constant of the prime counting bound pi(x) < x/ln x (1 + 1.2762/ln x), x >= 2.
DUSART_CONSTANT = 1.2762

# Slack for comparing float log-products against ln(target); far above the
# rounding error of summing a few hundred logarithms.
_LOG_EPS = 1e-9


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % f for f in range(2, math.isqrt(p) + 1))


@dataclass(frozen=True)
class PrimePowerPlan:
    """The moduli of a Chinese Remainder Sieve, as (prime, exponent) pairs.

    :param entries: (p, e) with distinct primes ascending and every e >= 1.
    :param target_n: The n the plan was chosen for, if known.
    :param target_d: The d the plan was chosen for, if known.
    :param search_exponents: For plans from optimize_exponents, the exponent of every
        prime of the searched pool, zeros included, in pool order.
    """

    entries: Tuple[Tuple[int, int], ...]
    target_n: Optional[int] = None
    target_d: Optional[int] = None
    search_exponents: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(p), int(e)) for p, e in self.entries))
        previous = 1
        for p, e in self.entries:
            if p <= previous or not _is_prime(p):
                raise InputError(f"Plan primes must be distinct ascending primes, got {p}.")
            if e < 1:
                raise InputError(f"Plan exponents must be at least 1, got {p}^{e}.")
            previous = p
        if self.target_n is not None and self.target_d is not None:
            if not self.covers(self.target_n, self.target_d):
                raise InputError(
                    f"Plan product {self.product} is below n^d ="
                    f" {self.target_n}^{self.target_d}."
                )

    @property
    def moduli(self) -> Tuple[int, ...]:
        return tuple(p**e for p, e in self.entries)

    @property
    def product(self) -> int:
        return math.prod(self.moduli)

    @property
    def cost(self) -> int:
        """The number of tests t of the matrix this plan generates."""
        return sum(self.moduli)

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.entries)

    def covers(self, n: int, d: int) -> bool:
        # >= is enough for disjunctness. Collecting primes until the product is
        # strictly greater gives the same prefix except when it equals n^d exactly.
        return self.product >= n**d

    def tokens(self) -> List[str]:
        return [str(p) if e == 1 else f"{p}^{e}" for p, e in self.entries]

    def to_params_field(self) -> str:
        return "primepowers=" + ",".join(self.tokens())

    @classmethod
    def from_tokens(
        cls, text: str, n: Optional[int] = None, d: Optional[int] = None
    ) -> "PrimePowerPlan":
        """Parses '2^2,3^2,5,7,11'."""
        entries = []
        for token in filter(None, (s.strip() for s in text.split(","))):
            base, _, exponent = token.partition("^")
            try:
                entries.append((int(base), int(exponent) if exponent else 1))
            except ValueError:
                raise InputError(f"Bad prime power token {token!r}.") from None
        return cls(tuple(entries), target_n=n, target_d=d)


@dataclass(frozen=True)
class BoundReport:
    """Analytic bounds next to the realized test count for one (n, d).

    :param x: ceil(2 d ln n), the prime cutoff of the analysis.
    :param sigma_bound: sigma(x), the exact sum of primes <= x; t <= sigma(x).
    :param theorem_bound: The closed form bound on t.
    :param sampling_bound: The closed form bound on the sampling rate.
    """

    x: int
    sigma_bound: int
    theorem_bound: float
    actual_t: int
    sampling_rate: int
    sampling_bound: float


def _check_nd(n: int, d: int) -> None:
    if d < 1 or d >= n:
        raise InputError(f"Need 1 <= d < n, got n={n}, d={d}.")


def select_prime_plan(n: int, d: int) -> PrimePowerPlan:
    """The smallest prefix of the primes whose product is at least n^d."""
    _check_nd(n, d)
    target = n**d
    entries = []
    product = 1
    for p in primes_stream():
        entries.append((p, 1))
        product *= p
        if product >= target:
            break
    plan = PrimePowerPlan(tuple(entries), target_n=n, target_d=d)
    _tracer.add_event(
        EventAttrValue.PLAN_SELECTED,
        {EventAttrKey.PLAN: ",".join(plan.tokens()), EventAttrKey.COST: plan.cost},
    )
    return plan


def _max_exponent(p: int, maxpow: int) -> int:
    e = 0
    while p ** (e + 1) <= maxpow:
        e += 1
    return e


def _suffix_log_products(
    primes: Sequence[int], max_exponents: Sequence[int], cap: int
) -> np.ndarray:
    """best[j][c]: the largest ln(product) reachable from primes[j:] at cost <= c.

    Row len(primes) is all zeros (nothing left to choose). Every row is
    nondecreasing in c, so the cheapest cost reaching a log-target is a
    searchsorted lookup.
    """
    best = np.zeros((len(primes) + 1, cap + 1))
    for j in range(len(primes) - 1, -1, -1):
        after = best[j + 1]
        row = after.copy()
        p = primes[j]
        for e in range(1, max_exponents[j] + 1):
            value = p**e
            if value > cap:
                break
            gain = after[: cap + 1 - value] + e * math.log(p)
            np.maximum(row[value:], gain, out=row[value:])
        best[j] = row
    return best


def optimize_exponents(
    primes: Sequence[int],
    maxpow: int,
    target: int,
    n: Optional[int] = None,
    d: Optional[int] = None,
) -> PrimePowerPlan:
    """Cheapest prime powers, each <= maxpow, whose product is at least target.

    Exponents may be 0 (prime unused). Among minimum cost assignments the
    lexicographically smallest exponent list (in ascending prime order) wins, the
    same tie-breaking as a min over (cost, exponents) pairs.

    The search is a depth-first walk over primes in ascending order and exponents
    in ascending order, so complete assignments are met in lexicographic order and
    only strictly cheaper ones replace the incumbent. Subtrees are pruned with an
    exact bound: a suffix table of the best log-product per cost.
    """
    primes = [int(p) for p in primes]
    if any(b <= a for a, b in zip(primes, primes[1:])):
        raise InputError(f"Primes must be strictly ascending, got {primes}.")
    if maxpow < 1 or target < 1:
        raise InputError(f"Need maxpow >= 1 and target >= 1, got {maxpow}, {target}.")

    with _tracer.start_as_current_span(
        SpanName.PLAN_SEARCH, {EventAttrKey.N: n, EventAttrKey.D: d}
    ):
        if target <= 1:
            return _plan_from_exponents(primes, [0] * len(primes), n, d)
        if maxpow ** len(primes) < target:
            raise NoSolutionError(
                f"No prime powers <= {maxpow} over {len(primes)} primes reach {target}."
            )
        max_exponents = [_max_exponent(p, maxpow) for p in primes]
        largest = [p**e for p, e in zip(primes, max_exponents)]
        if math.prod(largest) < target:
            raise NoSolutionError(
                f"Even the largest powers <= {maxpow} of {primes} multiply to less"
                f" than {target}."
            )
        # Any feasible assignment's cost caps the search.
        cap = sum(v for v in largest if v > 1)
        usable = [p for p in primes if p <= maxpow]
        if math.prod(usable) >= target:
            cap = min(cap, sum(usable))

        best = _suffix_log_products(primes, max_exponents, cap)
        search = _ExponentSearch(primes, max_exponents, best, cap)
        search.run(target)
        if search.best_exponents is None:
            raise NoSolutionError(f"No assignment of {primes} reaches {target}.")

        plan = _plan_from_exponents(primes, search.best_exponents, n, d)
        _tracer.add_event(
            EventAttrValue.PLAN_OPTIMIZED,
            {
                EventAttrKey.PLAN: ",".join(plan.tokens()),
                EventAttrKey.COST: plan.cost,
                EventAttrKey.NODES: search.nodes,
            },
        )
        _log.debug(
            "Exponent search over %d primes visited %d nodes, cost %d",
            len(primes),
            search.nodes,
            plan.cost,
        )
        return plan


class _ExponentSearch:
    def __init__(self, primes, max_exponents, best, cap):
        self.primes = primes
        self.max_exponents = max_exponents
        self.best = best
        self.best_cost = cap + 1
        self.best_exponents = None
        self.nodes = 0
        self._chosen = []

    def _cheapest_completion(self, j: int, remaining: int) -> Optional[int]:
        """Lower bound on the cost primes[j:] need to reach `remaining`."""
        if remaining <= 1:
            return 0
        row = self.best[j]
        c = int(np.searchsorted(row, math.log(remaining) - _LOG_EPS, side="left"))
        return None if c >= len(row) else c

    def run(self, target: int) -> None:
        self._visit(0, target, 0)

    def _visit(self, j: int, remaining: int, cost: int) -> None:
        self.nodes += 1
        if remaining <= 1:
            # Zeros are the lexicographically smallest completion.
            if cost < self.best_cost:
                self.best_cost = cost
                self.best_exponents = self._chosen + [0] * (len(self.primes) - j)
            return
        if j == len(self.primes):
            return
        p = self.primes[j]
        power = 1
        for e in range(self.max_exponents[j] + 1):
            spent = cost + (power if e else 0)
            if spent >= self.best_cost:
                break
            rest = -(-remaining // power)
            need = self._cheapest_completion(j + 1, rest)
            if need is not None and spent + need < self.best_cost:
                self._chosen.append(e)
                self._visit(j + 1, rest, spent)
                self._chosen.pop()
            power *= p


def _plan_from_exponents(primes, exponents, n, d) -> PrimePowerPlan:
    return PrimePowerPlan(
        tuple((p, e) for p, e in zip(primes, exponents) if e),
        target_n=n,
        target_d=d,
        search_exponents=tuple(exponents),
    )


def backtrack_plan(n: int, d: int, maxpow: Optional[int] = None) -> PrimePowerPlan:
    """The heuristic improvement of the e_j = 1 plan.

    Starts from the primes of select_prime_plan and searches their exponents with
    each power bounded by maxpow, by default the largest of those primes.
    """
    base = select_prime_plan(n, d)
    pool = base.primes
    return optimize_exponents(pool, maxpow or pool[-1], n**d, n=n, d=d)


def build_crs_matrix(n: int, plan: PrimePowerPlan, d: Optional[int] = None) -> TestMatrix:
    """Stacks one residue-class submatrix per modulus, in plan order.

    Row <j, x> pools {i < n : i = x (mod p_j^e_j)} for x = 0 .. p_j^e_j - 1.
    Residues >= n give empty tests, which keeps t = sum of the moduli.
    """
    d = plan.target_d if d is None else d
    if d is None:
        raise InputError("The plan does not record d; pass d explicitly.")
    _check_nd(n, d)
    if not plan.covers(n, d):
        raise InputError(f"Plan product {plan.product} is below n^d = {n}^{d}.")
    with ctx.set({EventAttrKey.METHOD: Method.CRS, EventAttrKey.N: n, EventAttrKey.D: d}):
        with _tracer.start_as_current_span(
            SpanName.CONSTRUCT_CRS, {EventAttrKey.PLAN: ",".join(plan.tokens())}
        ):
            rows = []
            for modulus in plan.moduli:
                rows.extend(tuple(range(x, n, modulus)) for x in range(modulus))
            return TestMatrix(n=n, rows=tuple(rows), method=Method.CRS, d=d, params=plan)


def sigma_bound(x: int) -> float:
    """Upper bound on sigma(x), the sum of primes <= x, for integer x >= 2."""
    if x < 2:
        raise InputError(f"The prime sum bound needs x >= 2, got {x}.")
    ln_x = math.log(x)
    return x * x / (2 * ln_x) * (1 + DUSART_CONSTANT / ln_x)


def _prime_cutoff(n: int, d: int) -> int:
    x = math.ceil(2 * d * math.log(n))
    if x < 2:
        raise InputError(f"ceil(2 d ln n) = {x} is below 2 for n={n}, d={d}.")
    return x


def theorem_bound(n: int, d: int) -> float:
    """Closed form upper bound on the e_j = 1 test count: sigma_bound(ceil(2 d ln n))."""
    return sigma_bound(_prime_cutoff(n, d))


def sampling_bound(n: int, d: int) -> float:
    """Closed form upper bound on the sampling rate of the e_j = 1 construction."""
    x = _prime_cutoff(n, d)
    ln_x = math.log(x)
    return x / (2 * ln_x) * (1 + DUSART_CONSTANT / ln_x)


def bound_report(n: int, d: int, plan: Optional[PrimePowerPlan] = None) -> BoundReport:
    plan = plan or select_prime_plan(n, d)
    x = _prime_cutoff(n, d)
    return BoundReport(
        x=x,
        sigma_bound=prime_sum(x),
        theorem_bound=theorem_bound(n, d),
        actual_t=plan.cost,
        # Each item lies in exactly one residue class per modulus.
        sampling_rate=len(plan.entries),
        sampling_bound=sampling_bound(n, d),
    )


def describe_plan(plan: PrimePowerPlan) -> str:
    """One line summary, e.g. 'n = 100 d = 2 : 2^2 3^2 5 7 11 total tests: 36'."""
    return (
        f"n = {plan.target_n} d = {plan.target_d} : {' '.join(plan.tokens())}"
        f" total tests: {plan.cost}"
    )
