"""Polynomial step-size and batch-size laws plus their admissibility checks.

Every law has the form ``base * n**(-exponent)``. The checks encode the
conditions on the exponents (a, b, c) under which the averaged iterate is
guaranteed to converge when the Markov kernel bias scales like sqrt(gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ScheduleSet:
    """delta_n = delta0 n^-a, gamma_n = min(gamma0 n^-b, gamma_bar), m_n = ceil(m0 n^c)."""

    delta0: float
    a: float
    gamma0: float
    b: float = 0.0
    m0: int = 1
    c: float = 0.0
    gamma_bar: float = math.inf

    def __post_init__(self):
        if self.delta0 <= 0 or self.gamma0 <= 0 or self.gamma_bar <= 0:
            raise ValueError("delta0, gamma0 and gamma_bar must be positive")
        if self.m0 < 1:
            raise ValueError("m0 must be a positive integer")
        if min(self.a, self.b, self.c) < 0:
            raise ValueError("exponents a, b, c must be non-negative")

    def delta(self, n: int) -> float:
        return eval_delta(n, self)

    def gamma(self, n: int) -> float:
        return eval_gamma(n, self)

    def batch(self, n: int) -> int:
        return eval_batch(n, self)


def _check_index(n: int) -> None:
    if n < 1:
        raise ValueError(f"schedules are indexed from n=1, got n={n}")


def eval_delta(n: int, s: ScheduleSet) -> float:
    _check_index(n)
    return s.delta0 * n ** (-s.a)


def eval_gamma(n: int, s: ScheduleSet) -> float:
    _check_index(n)
    return min(s.gamma0 * n ** (-s.b), s.gamma_bar)


def eval_batch(n: int, s: ScheduleSet) -> int:
    _check_index(n)
    # guard against ceil(4.000000000001) = 5 from pow round-off
    value = s.m0 * n ** s.c
    nearest = round(value)
    if abs(value - nearest) < 1e-9 * max(1.0, value):
        return max(1, int(nearest))
    return max(1, math.ceil(value))


class ScheduleVerdict(NamedTuple):
    valid: bool
    violated: list


class FixedBatchVerdict(NamedTuple):
    valid: bool
    b_interval: tuple


# Strict inequalities need a margin: 5/6 and friends are not exact in binary.
BOUNDARY_TOL = 1e-12


def _above(lhs: float, rhs: float) -> bool:
    return lhs > rhs + BOUNDARY_TOL


def check_increasing_batch(a: float, b: float, c: float) -> ScheduleVerdict:
    """Exponent conditions a < 1, a + b/2 > 1 and a - b + c > 1.

    Values within ``BOUNDARY_TOL`` of a boundary count as on it, hence invalid.
    """
    violated = []
    if not _above(1.0, a):
        violated.append("a<1")
    if not _above(a + b / 2, 1.0):
        violated.append("a+b/2>1")
    if not _above(a - b + c, 1.0):
        violated.append("a-b+c>1")
    return ScheduleVerdict(not violated, violated)


def check_fixed_batch(a: float, b: float) -> FixedBatchVerdict:
    """Fixed batch size: b must lie strictly inside (2(1-a), a-1/2).

    The interval is non-empty only when a > 5/6.
    """
    lo, hi = 2.0 * (1.0 - a), a - 0.5
    return FixedBatchVerdict(bool(_above(b, lo) and _above(hi, b)), (lo, hi))


def fixed_batch_feasible(a: float) -> bool:
    lo, hi = check_fixed_batch(a, 0.0).b_interval
    return _above(hi, lo)


def schedule_table(s: ScheduleSet, n_max: int) -> np.ndarray:
    """Evaluate (delta_n, gamma_n, m_n) for n = 1..n_max as an (n_max, 3) array."""
    n = np.arange(1, n_max + 1, dtype=float)
    deltas = s.delta0 * n ** (-s.a)
    gammas = np.minimum(s.gamma0 * n ** (-s.b), s.gamma_bar)
    batches = np.array([eval_batch(int(k), s) for k in n], dtype=float)
    return np.column_stack([deltas, gammas, batches])
