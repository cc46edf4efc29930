"""Unadjusted Langevin kernel and warm-started chain runner."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np


class NonFiniteStateError(FloatingPointError):
    """Raised when a gradient or chain state stops being finite."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class RngStream:
    """Gaussian source identified by ``(seed, stream_id)``.

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream_id,))``,
    the same mechanism numpy uses for ``SeedSequence.spawn``, so distinct ids
    give independent PCG64 streams and equal ids give identical draws.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be unsigned")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sseq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(sseq))

    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def substream(self, index: int) -> "RngStream":
        """Independent child stream, e.g. one per grid point of a scan."""
        child = RngStream.__new__(RngStream)
        child.seed = self.seed
        child.stream_id = self.stream_id
        sseq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(index) + 1))
        child.generator = np.random.Generator(np.random.PCG64(sseq))
        return child

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


GradFn = Callable[[np.ndarray], np.ndarray]

_NOISE_BLOCK = 8192


def ula_step(x: np.ndarray, grad_log_target: GradFn, gamma: float, rng: RngStream,
             noise: np.ndarray | None = None, iteration: int | None = None) -> np.ndarray:
    """One ULA move ``x + gamma * grad log pi(x) + sqrt(2 gamma) z``.

    ``noise`` lets callers supply ``z`` explicitly; otherwise exactly
    ``x.size`` standard normals are drawn from ``rng``.
    """
    grad = grad_log_target(x)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteStateError("non-finite gradient of the log target", iteration)
    if noise is None:
        noise = rng.standard_normal(x.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = x + gamma * grad + np.sqrt(2.0 * gamma) * noise
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteStateError("non-finite chain state (step size too large?)", iteration)
    return x_new


def run_chain(x0: np.ndarray, grad_log_target: GradFn, gamma: float, m: int,
              rng: RngStream, iteration: int | None = None):
    """Run ``m`` ULA steps from ``x0``.

    Returns ``(samples, final)`` where ``samples[k]`` is the state after
    ``k + 1`` steps and ``final is samples[-1]``, ready to warm-start the
    next chain.
    """
    if m < 1:
        raise ValueError("chain length m must be >= 1")
    x = np.array(x0, dtype=float)
    samples = np.empty((m,) + x.shape)
    scale = math.sqrt(2.0 * gamma)
    done = 0
    while done < m:
        # Noise is drawn in blocks; the stream is consumed exactly as by
        # repeated ula_step calls, so results match step for step.
        size = min(_NOISE_BLOCK, m - done)
        noise = rng.standard_normal((size,) + x.shape)
        noise *= scale
        for j in range(size):
            grad = grad_log_target(x)
            # a sum is NaN or inf whenever any entry is
            if not math.isfinite(grad.sum()):
                raise NonFiniteStateError("non-finite gradient of the log target", iteration)
            x = x + gamma * grad + noise[j]
            if not math.isfinite(x.sum()):
                raise NonFiniteStateError("non-finite chain state (step size too large?)", iteration)
            samples[done + j] = x
        done += size
    return samples, samples[-1]
