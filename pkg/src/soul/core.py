"""Parameter domains, projection and the weighted averaged iterate."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ParameterDomain:
    """Axis-aligned box of admissible parameters.

    Bounds may be infinite on either side (e.g. ``[1e-5, inf)`` for a scale
    parameter); ``is_compact`` reports whether every side is finite.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("domain bounds must not be NaN")
        if np.any(lower > upper):
            raise ValueError("every lower bound must be <= the matching upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def box(cls, lower, upper, dim: int = 1) -> "ParameterDomain":
        """Build a domain with the same interval repeated ``dim`` times."""
        return cls(np.full(dim, lower, dtype=float), np.full(dim, upper, dtype=float))

    @classmethod
    def unbounded(cls, dim: int) -> "ParameterDomain":
        return cls.box(-np.inf, np.inf, dim)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def is_compact(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


def project(theta, domain: ParameterDomain) -> np.ndarray:
    """Euclidean projection onto a box, i.e. a per-coordinate clamp."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (domain.dim,):
        raise ValueError(f"theta has shape {theta.shape}, domain has dim {domain.dim}")
    return np.clip(theta, domain.lower, domain.upper)


def averaged_iterate(thetas: Sequence, deltas: Sequence[float]) -> np.ndarray:
    """Batch form of the step-size weighted average sum(d_n t_n) / sum(d_n)."""
    thetas = np.asarray(thetas, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if thetas.shape[0] == 0:
        raise ValueError("need at least one iterate")
    if thetas.shape[0] != deltas.shape[0]:
        raise ValueError("thetas and deltas must have the same length")
    if np.any(deltas <= 0):
        raise ValueError("all step sizes must be positive")
    if thetas.ndim == 1:
        thetas = thetas[:, None]
    return deltas @ thetas / deltas.sum()


class RunningAverage:
    """Incremental version of :func:`averaged_iterate`.

    Keeps only the current mean and the cumulative weight, so long runs do
    not need to store every iterate.
    """

    def __init__(self, dim: int):
        self.mean = np.zeros(dim)
        self.weight = 0.0
        self.count = 0

    def update(self, theta, delta: float) -> np.ndarray:
        if delta <= 0:
            raise ValueError("step size must be positive")
        self.weight += delta
        self.count += 1
        self.mean = self.mean + (delta / self.weight) * (np.asarray(theta, dtype=float) - self.mean)
        return self.mean


@dataclass
class RunTrace:
    """Record of one optimisation run.

    ``thetas`` and ``averaged`` hold the recorded (possibly thinned) iterates
    of the averaging phase; ``iterations`` the matching 1-based indices.
    ``warmup_thetas`` keeps the iterates that were excluded from the average.
    """

    iterations: np.ndarray
    thetas: np.ndarray
    averaged: np.ndarray
    deltas: np.ndarray
    theta_hat: np.ndarray
    final_latent: np.ndarray
    warmup_thetas: np.ndarray
    retained_samples: Optional[np.ndarray] = None
    seed: int = 0
    stream_id: int = 0
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)
