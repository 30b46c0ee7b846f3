"""Prime generation and the exact prime summation functions.

sigma(x), theta(x) and pi(x) are the sum, the sum of logarithms and the count of
the primes <= x; the test count bounds of the Chinese Remainder Sieve are stated
in terms of them.
"""
from itertools import islice
import math
from typing import Dict, Iterator, List

import numpy as np


def primes_stream() -> Iterator[int]:
    """Yields 2, 3, 5, 7, ... without end (incremental Sieve of Eratosthenes).

    Each composite is keyed by its next multiple, so memory grows with the number
    of primes found so far rather than with a fixed sieve limit.
    """
    witnesses: Dict[int, List[int]] = {}  # composite -> primes dividing it
    q = 2
    while True:
        if q not in witnesses:
            yield q
            witnesses[q * q] = [q]
        else:
            for p in witnesses.pop(q):
                witnesses.setdefault(p + q, []).append(p)
        q += 1


def first_primes(count: int) -> List[int]:
    return list(islice(primes_stream(), count))


def primes_upto(x: int) -> np.ndarray:
    """All primes <= x in ascending order, by a fixed-size sieve."""
    if x < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(x + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(x) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def prime_sum(x: int) -> int:
    """sigma(x): the sum of the primes <= x."""
    return int(primes_upto(x).sum())


def prime_count(x: int) -> int:
    """pi(x): the number of primes <= x."""
    return len(primes_upto(x))


def chebyshev_theta(x: int) -> float:
    """theta(x): the sum of ln p over the primes p <= x."""
    return float(np.log(primes_upto(x)).sum())
