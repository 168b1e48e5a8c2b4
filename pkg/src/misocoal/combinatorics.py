"""Exact counts of merge and split deviations and the iteration bound.

All values are Python integers, so there is no overflow or cancellation
for large ``K``.
"""

from __future__ import annotations

import csv
import io
from functools import lru_cache
from math import comb
from typing import Iterable


def merge_count(m: int, q: int) -> int:
    """Ways to merge between 2 and ``q`` of ``m`` coalitions."""
    if m < 0 or q < 2:
        raise ValueError("need m >= 0 and q >= 2")
    return sum(comb(m, j) for j in range(2, min(q, m) + 1))


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple:
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        row[k] = (k * prev[k] if k < len(prev) else 0) + prev[k - 1]
    return tuple(row)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind via ``S(n,k) = k S(n-1,k) + S(n-1,k-1)``."""
    if n < 0 or k < 0:
        raise ValueError("arguments must be non-negative")
    if k > n:
        return 0
    return _stirling_row(n)[k]


def stirling2_alternating(n: int, k: int) -> int:
    """Inclusion-exclusion form, kept as an independent cross-check."""
    total = sum((-1) ** t * comb(k, t) * (k - t) ** n for t in range(k + 1))
    f = 1
    for x in range(2, k + 1):
        f *= x
    return total // f


def bell(n: int) -> int:
    return sum(_stirling_row(n))


def split_count(n: int, q: int) -> int:
    """Ways to split ``n`` players into at least 2 and at most ``q`` blocks."""
    if n < 1 or q < 2:
        raise ValueError("need n >= 1 and q >= 2")
    return sum(stirling2(n, k) for k in range(2, min(q, n) + 1))


def worst_case_iters(K: int, q: int) -> int:
    """Upper bound on candidate evaluations of the merge algorithm."""
    if K < 2 or q < 2:
        raise ValueError("need K >= 2 and q >= 2")
    return sum(merge_count(K - i, q) for i in range(K - 1))


def complexity_rows(k_values: Iterable[int], q_values: Iterable[int]) -> list:
    """``(K, q, D, T, W)`` tuples for every pair of inputs."""
    q_values = list(q_values)
    return [(k, q, merge_count(k, q), split_count(k, q), worst_case_iters(k, q))
            for k in k_values for q in q_values]


def complexity_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["K", "q", "D", "T", "W"])
    writer.writerows(rows)
    return buf.getvalue()
