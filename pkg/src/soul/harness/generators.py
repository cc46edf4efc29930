"""Synthetic problem generators for the audio and random-effects experiments."""
from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from ..kernel import RngStream
from ..models.audio import AudioProblem
from ..models.random_effects import RandomEffectsProblem

PAPER_AUDIO = dict(ell=319725, d_notes=100, d_positions=29, p=456, sigma=0.015, lam=4e-5)
DESK_AUDIO = dict(ell=4000, d_notes=20, d_positions=10, p=120, sigma=0.015, lam=4e-5, sparsity=8)


def note_dictionary(ell: int, d_notes: int, d_positions: int, base_hz: float | None = None):
    """Hann-windowed sinusoids, one column per (position, note), unit norm.

    Each position is a window of ``ell // d_positions`` samples standing for
    a quarter second, so the implied sample rate is ``4 * window``. Notes
    are consecutive semitones from ``base_hz``; the default keeps the top
    note below 0.35 of the sample rate.
    """
    window = ell // d_positions
    if window < 2:
        raise ValueError("window too short: need ell >= 2 * d_positions")
    fs = 4.0 * window
    if base_hz is None:
        base_hz = min(110.0, 0.35 * fs / 2.0 ** ((d_notes - 1) / 12.0))
    t = np.arange(window) / fs
    taper = np.hanning(window)
    atoms = np.empty((window, d_notes))
    for f in range(d_notes):
        hz = base_hz * 2.0 ** (f / 12.0)
        atom = taper * np.sin(2.0 * np.pi * hz * t)
        atoms[:, f] = atom / np.linalg.norm(atom)
    rows, cols, vals = [], [], []
    r = np.arange(window)
    for pos in range(d_positions):
        for f in range(d_notes):
            rows.append(pos * window + r)
            cols.append(np.full(window, pos * d_notes + f))
            vals.append(atoms[:, f])
    return sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ell, d_notes * d_positions),
    )


def gen_audio_problem(seed: int, ell: int = 4000, d_notes: int = 20, d_positions: int = 10,
                      p: int = 120, sigma: float = 0.015, lam: float = 4e-5, sparsity: int = 8) -> AudioProblem:
    """Sparse note activations observed at ``p`` random time samples plus noise."""
    d = d_notes * d_positions
    if d > ell or p >= ell or p < 1:
        raise ValueError(f"infeasible dimensions: d={d}, p={p}, ell={ell}")
    if not 0 <= sparsity <= d:
        raise ValueError("sparsity must lie in [0, d]")
    rng = RngStream(seed).generator
    psi = note_dictionary(ell, d_notes, d_positions)
    x_true = np.zeros(d)
    active = rng.choice(d, size=sparsity, replace=False)
    x_true[active] = rng.uniform(0.5, 1.5, size=sparsity)
    z_true = np.asarray(psi @ x_true).reshape(-1)
    idx = np.sort(rng.choice(ell, size=p, replace=False))
    y = z_true[idx] + sigma * rng.standard_normal(p)
    return AudioProblem(psi, idx, y, sigma, lam, truth=z_true, x_true=x_true)


def gen_random_effects_problem(seed: int, d_y: int = 500, p: int = 1000, d: int = 5,
                               sigma_true: float = 0.1, zero_frac: float = 0.98, lam: float = 30.0):
    """Return ``(problem, beta_true, x_true)``.

    Covariate rows are N(0, I_p / p) and loading rows N(0, I_d / d), which
    keeps the logits O(1) at these dimensions.
    """
    if not 0.0 <= zero_frac < 1.0:
        raise ValueError("zero_frac must lie in [0, 1)")
    rng = RngStream(seed).generator
    beta = rng.uniform(1.0, 5.0, size=p)
    n_zero = int(math.floor(zero_frac * p + 1e-9))
    beta[rng.choice(p, size=n_zero, replace=False)] = 0.0
    x_true = rng.standard_normal(d)
    v = rng.standard_normal((d_y, p)) / math.sqrt(p)
    z = rng.standard_normal((d_y, d)) / math.sqrt(d)
    logits = v @ beta + sigma_true * (z @ x_true)
    labels = (rng.uniform(size=d_y) < 1.0 / (1.0 + np.exp(-logits))).astype(float)
    return RandomEffectsProblem(v, z, labels, lam=lam), beta, x_true
