"""Truncated harmonic mean estimate of the marginal likelihood over a theta grid."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from ..kernel import NonFiniteStateError, RngStream


class ThmeEstimate(NamedTuple):
    log_phat: float
    n_inside: int
    radius: float
    stderr: float


def log_ball_volume(dim: int, radius: float) -> float:
    return 0.5 * dim * math.log(math.pi) + dim * math.log(radius) - gammaln(0.5 * dim + 1.0)


def thme_estimate(samples, log_joint, target_fraction: float = 0.4, batched: bool = False,
                  n_batches: int = 10) -> ThmeEstimate:
    """Estimate log p(y | theta) from posterior samples.

    The truncation set is the ball around the sample mean whose radius is the
    ``target_fraction`` quantile of the sample distances, so exactly
    ``ceil(target_fraction * n)`` samples fall inside (ties aside). The
    standard error comes from splitting the samples into ``n_batches``
    contiguous blocks that share the same ball.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, dim = samples.shape
    if n < 50:
        raise ValueError("need at least 50 samples")
    if not 0.0 < target_fraction < 1.0:
        raise ValueError("target_fraction must lie in (0, 1)")
    center = samples.mean(axis=0)
    dist = np.linalg.norm(samples - center, axis=1)
    k = max(1, math.ceil(target_fraction * n))
    radius = float(np.partition(dist, k - 1)[k - 1])
    inside = dist <= radius
    if radius <= 0 or not inside.any():
        raise ValueError("no samples inside the truncation ball")
    if batched:
        lj = np.asarray(log_joint(samples[inside]), dtype=float)
    else:
        lj = np.array([log_joint(s) for s in samples[inside]], dtype=float)
    if not np.all(np.isfinite(lj)):
        raise ValueError("log_joint is not finite on the samples")
    log_vol = log_ball_volume(dim, radius)
    log_phat = math.log(n) + log_vol - logsumexp(-lj)

    # Block estimates for the Monte Carlo error, reusing the same ball.
    neg = np.full(n, -np.inf)
    neg[inside] = -lj
    per_block = []
    for block in np.array_split(np.arange(n), n_batches):
        if np.isfinite(neg[block]).any():
            per_block.append(math.log(len(block)) + log_vol - logsumexp(neg[block]))
    stderr = float(np.std(per_block, ddof=1) / math.sqrt(len(per_block))) if len(per_block) > 1 else math.nan
    return ThmeEstimate(float(log_phat), int(inside.sum()), radius, stderr)


def thme(samples, log_joint, target_fraction: float = 0.4, batched: bool = False) -> float:
    """log of n Vol(A) / sum_k 1_A(x_k) / p(x_k, y | theta)."""
    return thme_estimate(samples, log_joint, target_fraction, batched).log_phat


@dataclass(frozen=True)
class ChainConfig:
    """ULA settings for sampling at a fixed theta.

    ``n_chains`` independent chains are advanced together when the model
    offers batched gradients; samples are pooled after ``burnin`` steps and
    thinned by ``thin``.
    """

    gamma: float
    burnin: int = 1000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0


@dataclass
class ThmeScan:
    theta_grid: np.ndarray
    log_marginal: np.ndarray
    stderr: np.ndarray
    n_inside: np.ndarray
    radius: np.ndarray
    quad_coeffs: tuple
    theta_star: Optional[float]
    n_samples: int

    @property
    def concave_fit(self) -> bool:
        return self.quad_coeffs[0] < 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("theta,log_phat,n_inside,radius\n")
            for t, lp, ni, r in zip(self.theta_grid, self.log_marginal, self.n_inside, self.radius):
                fh.write(f"{t:.17g},{lp:.17g},{int(ni)},{r:.17g}\n")


def quadratic_fit(xs, ys):
    """Least-squares (a2, a1, a0) and the vertex -a1 / (2 a2) when a2 < 0."""
    a2, a1, a0 = np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), 2)
    star = float(-a1 / (2.0 * a2)) if a2 < 0 else None
    return (float(a2), float(a1), float(a0)), star


def sample_posterior(model, theta, n_samples: int, config: ChainConfig, rng: RngStream, x0=None) -> np.ndarray:
    """Draw ``n_samples`` approximate posterior samples of x at fixed theta with ULA."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    gamma = config.gamma
    scale = math.sqrt(2.0 * gamma)
    batched = config.n_chains > 1 and hasattr(model, "grad_x_log_posterior_batch")
    if batched:
        k = config.n_chains
        per_chain = math.ceil(n_samples / k)
        x = np.zeros((k, model.dim_x)) if x0 is None else np.tile(np.asarray(x0, dtype=float), (k, 1))
        out = np.empty((per_chain, k, model.dim_x))
        grad = model.grad_x_log_posterior_batch
        total = config.burnin + per_chain * config.thin
        j = 0
        for step in range(1, total + 1):
            x = x + gamma * grad(x, theta) + scale * rng.standard_normal(x.shape)
            if step > config.burnin and (step - config.burnin) % config.thin == 0:
                out[j] = x
                j += 1
        if not np.all(np.isfinite(out)):
            raise NonFiniteStateError("non-finite chain state while sampling at fixed theta")
        # chain-major order keeps blocks of consecutive draws together
        return out.transpose(1, 0, 2).reshape(-1, model.dim_x)[:n_samples]
    x = np.zeros(model.dim_x) if x0 is None else np.asarray(x0, dtype=float).copy()
    out = np.empty((n_samples, model.dim_x))
    grad = model.grad_x_log_posterior
    for _ in range(config.burnin):
        x = x + gamma * grad(x, theta) + scale * rng.standard_normal(x.shape)
    for i in range(n_samples):
        for _ in range(config.thin):
            x = x + gamma * grad(x, theta) + scale * rng.standard_normal(x.shape)
        out[i] = x
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError("non-finite chain state while sampling at fixed theta")
    return out


def thme_scan(model, theta_grid, n_samples_per_point: int, chain_config: ChainConfig,
              target_fraction: float = 0.4, x0=None) -> ThmeScan:
    """THME of log p(y | theta) at every grid point plus a quadratic fit.

    Grid point ``i`` uses substream ``i`` of ``RngStream(chain_config.seed)``
    so results do not depend on evaluation order.
    """
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 5:
        raise ValueError("theta_grid must be 1-D with at least 5 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("theta_grid must be strictly increasing")
    base = RngStream(chain_config.seed)
    batched_lj = hasattr(model, "log_joint_batch")
    estimates = []
    for i, t in enumerate(grid):
        theta = np.array([t])
        samples = sample_posterior(model, theta, n_samples_per_point, chain_config, base.substream(i), x0)
        if batched_lj:
            est = thme_estimate(samples, lambda xs: model.log_joint_batch(xs, theta), target_fraction, batched=True)
        else:
            est = thme_estimate(samples, lambda x: model.log_joint(x, theta), target_fraction)
        estimates.append(est)
    logp = np.array([e.log_phat for e in estimates])
    coeffs, star = quadratic_fit(grid, logp)
    return ThmeScan(
        theta_grid=grid,
        log_marginal=logp,
        stderr=np.array([e.stderr for e in estimates]),
        n_inside=np.array([e.n_inside for e in estimates]),
        radius=np.array([e.radius for e in estimates]),
        quad_coeffs=coeffs,
        theta_star=star,
        n_samples=n_samples_per_point,
    )
