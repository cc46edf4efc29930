"""Stochastic approximation driven by warm-started ULA chains.

Each outer iteration runs ``m_n`` Langevin steps targeting ``p(x | y, theta)``
from where the previous chain stopped, averages ``grad_theta log p(x, y | theta)``
over those samples and takes a projected ascent step on
``log p(y | theta) - g(theta)``. The reported estimate is the step-size
weighted average of the iterates.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol, runtime_checkable

import numpy as np

from .core import ParameterDomain, RunningAverage, RunTrace, project
from .kernel import NonFiniteStateError, RngStream, ula_step
from .schedules import ScheduleSet

logger = logging.getLogger(__name__)


@runtime_checkable
class Model(Protocol):
    """What the optimiser needs from a latent-variable model.

    ``theta`` is always a 1-D array of length ``dim_theta`` and ``x`` a 1-D
    array of length ``dim_x``. ``log_joint`` is only needed by the
    marginal-likelihood estimator.
    """

    dim_x: int
    dim_theta: int
    domain: ParameterDomain

    def grad_x_log_posterior(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray: ...

    def grad_theta_log_joint(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray: ...

    def grad_penalty(self, theta: np.ndarray) -> np.ndarray: ...

    def log_joint(self, x: np.ndarray, theta: np.ndarray) -> float: ...


@dataclass(frozen=True)
class SoulConfig:
    """Run controls.

    chain_burnin
        ULA steps at fixed ``theta0`` before the first update.
    theta_warmup
        Updates performed before averaging starts. They still advance the
        schedule index.
    record_every
        Thinning of the stored trace and of retained latent samples; the
        averaged estimate always uses every iterate.
    """

    n_iterations: int
    chain_burnin: int = 0
    theta_warmup: int = 0
    seed: int = 0
    stream_id: int = 0
    record_every: int = 1
    retain_latent: bool = False

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.chain_burnin < 0 or self.theta_warmup < 0:
            raise ValueError("burn-in counts must be non-negative")


def _as_vector(value, dim: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float)).copy()
    if arr.shape != (dim,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({dim},)")
    return arr


def soul_run(model: Model, theta0, x0, schedules: ScheduleSet, config: SoulConfig) -> RunTrace:
    """Run the optimiser and return its trace.

    Iteration ``n`` (1-based, counting warm-up) samples with ``gamma_n`` and
    ``m_n`` at the current parameter, then sets
    ``theta_n = proj(theta_{n-1} + delta_n (mean grad_theta - grad g))``.
    Averaging uses the pairs ``(theta_n, delta_n)`` after warm-up.
    """
    theta = _as_vector(theta0, model.dim_theta, "theta0")
    x = _as_vector(x0, model.dim_x, "x0")
    domain = model.domain
    if domain.dim != model.dim_theta:
        raise ValueError("model domain dimension does not match dim_theta")
    if not domain.contains(theta):
        raise ValueError("theta0 lies outside the parameter domain")

    rng = RngStream(config.seed, config.stream_id)
    grad_x = model.grad_x_log_posterior
    grad_theta = model.grad_theta_log_joint
    grad_penalty = model.grad_penalty
    start = time.perf_counter()

    gamma1 = schedules.gamma(1)
    theta_fixed = theta.copy()
    for k in range(config.chain_burnin):
        x = ula_step(x, lambda z: grad_x(z, theta_fixed), gamma1, rng, iteration=-(config.chain_burnin - k))

    total = config.theta_warmup + config.n_iterations
    n_records = (config.n_iterations + config.record_every - 1) // config.record_every
    iterations = np.empty(n_records, dtype=np.int64)
    rec_thetas = np.empty((n_records, model.dim_theta))
    rec_avg = np.empty((n_records, model.dim_theta))
    rec_deltas = np.empty(n_records)
    warmup = np.empty((config.theta_warmup, model.dim_theta))
    retained = [] if config.retain_latent else None
    average = RunningAverage(model.dim_theta)
    r = 0

    for n in range(1, total + 1):
        gamma = schedules.gamma(n)
        m = schedules.batch(n)
        delta = schedules.delta(n)
        current = theta
        target = lambda z: grad_x(z, current)  # noqa: E731
        drift = np.zeros(model.dim_theta)
        for _ in range(m):
            x = ula_step(x, target, gamma, rng, iteration=n)
            drift += grad_theta(x, current)
        drift /= m
        step = drift - grad_penalty(current)
        if not np.all(np.isfinite(step)):
            raise NonFiniteStateError("non-finite parameter gradient", n)
        theta = project(current + delta * step, domain)

        j = n - config.theta_warmup
        if j <= 0:
            warmup[n - 1] = theta
            continue
        average.update(theta, delta)
        if (j - 1) % config.record_every == 0:
            iterations[r] = n
            rec_thetas[r] = theta
            rec_avg[r] = average.mean
            rec_deltas[r] = delta
            r += 1
            if retained is not None:
                retained.append(x.copy())

    return RunTrace(
        iterations=iterations,
        thetas=rec_thetas,
        averaged=rec_avg,
        deltas=rec_deltas,
        theta_hat=average.mean.copy(),
        final_latent=x,
        warmup_thetas=warmup,
        retained_samples=np.array(retained) if retained is not None else None,
        seed=config.seed,
        stream_id=config.stream_id,
        wall_time=time.perf_counter() - start,
    )


class ReplicateFailure:
    """Placeholder for a replicate that raised; keeps the batch going."""

    def __init__(self, index: int, error: BaseException):
        self.index = index
        self.error = error

    def __repr__(self):
        return f"ReplicateFailure(index={self.index}, error={self.error!r})"


def _replicate_one(args):
    model, theta0, x0, schedules, config, i = args
    cfg = SoulConfig(
        n_iterations=config.n_iterations,
        chain_burnin=config.chain_burnin,
        theta_warmup=config.theta_warmup,
        seed=config.seed,
        stream_id=i,
        record_every=config.n_iterations,
        retain_latent=False,
    )
    try:
        return soul_run(model, theta0, x0, schedules, cfg).theta_hat
    except (ValueError, FloatingPointError) as exc:
        return ReplicateFailure(i, exc)


def default_workers() -> int:
    env = os.environ.get("SOUL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def replicate(model: Model, theta0, x0, schedules: ScheduleSet, config: SoulConfig,
              n_replicates: int, max_workers: Optional[int] = None) -> list:
    """Independent runs on streams ``(config.seed, i)`` for ``i < n_replicates``.

    Returns the final averaged estimates in stream order. A replicate that
    fails is reported as a :class:`ReplicateFailure` in its slot.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    workers = min(max_workers or default_workers(), n_replicates)
    jobs = [(model, theta0, x0, schedules, config, i) for i in range(n_replicates)]
    if workers == 1:
        results = [_replicate_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_one, jobs))
    failed = sum(isinstance(res, ReplicateFailure) for res in results)
    if failed:
        logger.warning("%d of %d replicates failed", failed, n_replicates)
    return results


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per recorded iterate: ``iter,delta,theta_*,avg_*``."""
    dim = trace.thetas.shape[1]
    header = ["iter", "delta"] + [f"theta_{i}" for i in range(dim)] + [f"avg_{i}" for i in range(dim)]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for it, delta, th, av in zip(trace.iterations, trace.deltas, trace.thetas, trace.averaged):
            fields = [str(int(it)), f"{delta:.17g}"]
            fields += [f"{v:.17g}" for v in th]
            fields += [f"{v:.17g}" for v in av]
            fh.write(",".join(fields) + "\n")
