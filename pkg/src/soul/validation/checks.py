"""Finite-difference gradient checker and a discrete concavity test."""
from __future__ import annotations

import numpy as np


def gradcheck(f, grad, point, h: float = 1e-5) -> float:
    """Largest relative gap between ``grad(point)`` and central differences of ``f``.

    The relative error of coordinate i is |g_i - fd_i| / max(|g_i|, 1e-8).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    point = np.atleast_1d(np.asarray(point, dtype=float))
    analytic = np.atleast_1d(np.asarray(grad(point), dtype=float))
    if analytic.shape != point.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match point shape {point.shape}")
    numeric = np.empty_like(point)
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h
        hi, lo = float(f(point + e)), float(f(point - e))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"f is not finite near coordinate {i}")
        numeric[i] = (hi - lo) / (2.0 * h)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1e-8)
    return float(rel.max())


def second_differences(xs, fs) -> np.ndarray:
    """Second differences generalised to uneven spacing.

    Entry i is twice the gap between f(x_i) and the chord through its
    neighbours (sign flipped), which equals f_{i+1} - 2 f_i + f_{i-1} on an
    even grid. Concave data gives non-positive values.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    if xs.shape != fs.shape or xs.ndim != 1:
        raise ValueError("xs and fs must be 1-D arrays of equal length")
    if len(xs) < 3:
        raise ValueError("need at least 3 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    left, mid, right = xs[:-2], xs[1:-1], xs[2:]
    w = (mid - left) / (right - left)
    chord = (1.0 - w) * fs[:-2] + w * fs[2:]
    return 2.0 * (chord - fs[1:-1])


def concavity_check(xs, fs, tol: float | None = None, stderr=None) -> bool:
    """True when no second difference exceeds ``tol``.

    Without an explicit ``tol`` the allowance is three times the pooled
    standard error ``sqrt(mean(stderr^2))`` when ``stderr`` is given, else 0.
    """
    d2 = second_differences(xs, fs)
    if tol is None:
        if stderr is not None:
            se = np.asarray(stderr, dtype=float)
            tol = 3.0 * float(np.sqrt(np.mean(se * se)))
        else:
            tol = 0.0
    return bool(np.all(d2 <= tol))
