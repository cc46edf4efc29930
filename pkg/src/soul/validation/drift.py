"""Monte Carlo check of the geometric drift condition for one ULA step.

For a target whose potential U = -log pi satisfies

    <grad U(x), x> >= m1 |x| 1{|x| > R1} + m2 |grad U(x)|^2 - c,

the Lyapunov function V(x) = exp(m1/4 sqrt(1 + |x|^2)) obeys
R_gamma V(x) <= lambda^gamma V(x) + b gamma 1{|x| < r} for gamma <= min(1, 2 m2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..kernel import RngStream


class TailParams(NamedTuple):
    m1: float
    m2: float
    c: float
    r1: float


class DriftConstants(NamedTuple):
    lam: float
    b: float
    r: float
    m1_tilde: float
    gamma_bar: float


def drift_constants(params: TailParams, dim: int, gamma_bar: Optional[float] = None) -> DriftConstants:
    m1, m2, c, r1 = params
    if m1 <= 0 or min(m2, c, r1) < 0:
        raise ValueError("need m1 > 0 and m2, c, R1 >= 0")
    if gamma_bar is None:
        gamma_bar = min(1.0, 2.0 * m2)
    mt = m1 / 4.0
    lam = math.exp(-mt * mt * (math.sqrt(2.0) - 1.0))
    r = max(1.0, 2.0 * (dim + c) / m1, r1)
    b = mt * (dim + c + math.sqrt(2.0) * mt) * math.exp(mt * ((dim + c + mt) * gamma_bar + math.sqrt(1.0 + r * r)))
    return DriftConstants(lam, b, r, mt, gamma_bar)


def lyapunov(x, m1_tilde: float) -> np.ndarray:
    """V(x) = exp(m1_tilde * sqrt(1 + |x|^2)), row-wise for 2-D input."""
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1)
    return np.exp(m1_tilde * np.sqrt(1.0 + sq))


@dataclass
class DriftReport:
    constants: TailParams
    derived: DriftConstants
    gamma: float
    test_points: np.ndarray
    lhs: np.ndarray
    stderr: np.ndarray
    rhs: np.ndarray
    passed: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    def to_csv(self, path) -> None:
        norms = np.linalg.norm(self.test_points, axis=1)
        with open(path, "w", newline="\n") as fh:
            fh.write("x_norm,lhs,stderr,rhs,pass\n")
            for xn, l, s, r, p in zip(norms, self.lhs, self.stderr, self.rhs, self.passed):
                fh.write(f"{xn:.17g},{l:.17g},{s:.17g},{r:.17g},{int(bool(p))}\n")


def drift_check(grad_log_target, tail_params, gamma: float, test_points, n_mc: int = 100_000,
                seed: int = 0, gamma_bar: Optional[float] = None) -> DriftReport:
    """Compare a Monte Carlo estimate of E V(X') with the drift bound at each point.

    A point passes when the estimate is at most the bound plus three
    standard errors.
    """
    params = TailParams(*tail_params)
    pts = np.atleast_2d(np.asarray(test_points, dtype=float))
    dim = pts.shape[1]
    const = drift_constants(params, dim, gamma_bar)
    upper = min(1.0, 2.0 * params.m2)
    if not 0.0 < gamma <= upper:
        raise ValueError(f"gamma must lie in (0, {upper}]")
    if gamma > const.gamma_bar:
        raise ValueError("gamma exceeds gamma_bar")
    rng = RngStream(seed)
    lhs, se, rhs = [], [], []
    for i, x in enumerate(pts):
        z = rng.substream(i).standard_normal((n_mc, dim))
        moved = x + gamma * np.asarray(grad_log_target(x), dtype=float) + math.sqrt(2.0 * gamma) * z
        vals = lyapunov(moved, const.m1_tilde)
        lhs.append(vals.mean())
        se.append(vals.std(ddof=1) / math.sqrt(n_mc))
        inside = float(np.linalg.norm(x) < const.r)
        rhs.append(const.lam ** gamma * float(lyapunov(x, const.m1_tilde)) + const.b * gamma * inside)
    lhs, se, rhs = np.array(lhs), np.array(se), np.array(rhs)
    return DriftReport(params, const, gamma, pts, lhs, se, rhs, lhs <= rhs + 3.0 * se)
