"""Experiment recipes: turn an ExperimentConfig into a model and a SOUL run."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from ..models import AudioModel, BayesianLogisticModel, ConjugateGaussianModel, RandomEffectsModel
from ..models.audio import map_reconstruct, mse, theta_cs
from ..optimizer import SoulConfig
from ..schedules import ScheduleSet, check_fixed_batch, check_increasing_batch
from .config import ExperimentConfig
from .data import load_csv_dataset, load_wisconsin, train_test_split
from .generators import gen_audio_problem, gen_random_effects_problem

logger = logging.getLogger(__name__)


def support_count(beta, tau: float = 0.005) -> int:
    """Number of coefficients with |beta_i| > tau."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return int(np.sum(np.abs(np.asarray(beta, dtype=float)) > tau))


@dataclass
class Experiment:
    name: str
    model: Any
    theta0: np.ndarray
    x0: np.ndarray
    schedules: ScheduleSet
    soul_config: SoulConfig
    extras: Dict[str, Any] = field(default_factory=dict)


def schedules_from(cfg: ExperimentConfig) -> ScheduleSet:
    return ScheduleSet(delta0=cfg.delta0, a=cfg.a, gamma0=cfg.gamma0, b=cfg.b, m0=cfg.m0, c=cfg.c,
                       gamma_bar=cfg.gamma_bar)


def schedule_warnings(s: ScheduleSet) -> list:
    """Theory conditions the schedule misses. These are advisory only."""
    if s.c == 0:
        verdict = check_fixed_batch(s.a, s.b)
        if verdict.valid:
            return []
        lo, hi = verdict.b_interval
        if lo >= hi:
            return [f"fixed batch with a={s.a:g} <= 5/6: no admissible b exists"]
        return [f"fixed batch: b={s.b:g} outside ({lo:g}, {hi:g})"]
    verdict = check_increasing_batch(s.a, s.b, s.c)
    return [f"increasing batch: condition {name} fails" for name in verdict.violated]


def soul_config_from(cfg: ExperimentConfig, seed=None) -> SoulConfig:
    return SoulConfig(
        n_iterations=cfg.n_iterations,
        chain_burnin=cfg.chain_burnin,
        theta_warmup=cfg.theta_warmup,
        seed=cfg.seed if seed is None else seed,
        record_every=cfg.record_every,
    )


def _bounds(cfg, lower, upper):
    lo = cfg.theta_lower if cfg.theta_lower is not None else lower
    hi = cfg.theta_upper if cfg.theta_upper is not None else upper
    if not lo < hi:
        raise ValueError("theta_lower must be below theta_upper")
    return lo, hi


def _blr(cfg):
    data = load_csv_dataset(cfg.resolve(cfg.data_in), cfg.sigma2) if cfg.data_in else load_wisconsin(cfg.sigma2)
    model = BayesianLogisticModel(data, bounds=_bounds(cfg, -100.0, 100.0))
    theta0 = np.array([cfg.theta0 if cfg.theta0 is not None else 0.0])
    return model, theta0, np.zeros(data.dim), {"data": data}


def _audio(cfg):
    prob = gen_audio_problem(cfg.problem_seed, ell=cfg.ell, d_notes=cfg.d_notes, d_positions=cfg.d_positions,
                             p=cfg.p, sigma=cfg.sigma, lam=cfg.lam, sparsity=cfg.sparsity)
    # theta settings are always given in natural units
    lo, hi = _bounds(cfg, 1.0, 1e9)
    start = cfg.theta0 if cfg.theta0 is not None else theta_cs(prob)
    start = min(max(start, lo), hi)
    if cfg.log_theta:
        if lo <= 0:
            raise ValueError("theta_lower must be positive with log_theta")
        model = AudioModel(prob, bounds=(math.log(lo), math.log(hi)), log_theta=True)
        theta0 = np.array([math.log(start)])
    else:
        model = AudioModel(prob, bounds=(lo, hi))
        theta0 = np.array([start])
    return model, theta0, np.zeros(prob.dim), {"problem": prob, "theta_cs": theta_cs(prob)}


def _random_effects(cfg):
    prob, beta, x_true = gen_random_effects_problem(
        cfg.problem_seed, d_y=cfg.d_y, p=cfg.p_fixed, d=cfg.d_random, sigma_true=cfg.sigma_true,
        zero_frac=cfg.zero_frac, lam=cfg.huber_lam)
    model = RandomEffectsModel(prob)
    sigma0 = cfg.theta0 if cfg.theta0 is not None else 1.0
    theta0 = np.concatenate([np.ones(prob.p), [sigma0]])
    return model, theta0, np.zeros(prob.d), {"problem": prob, "beta_true": beta, "x_true": x_true}


def _toy(cfg):
    model = ConjugateGaussianModel(cfg.y, cfg.prior_var, cfg.noise_var, bounds=_bounds(cfg, -1e3, 1e3))
    theta0 = np.array([cfg.theta0 if cfg.theta0 is not None else 0.0])
    return model, theta0, np.zeros(1), {}


BUILDERS = {"blr": _blr, "audio": _audio, "random_effects": _random_effects, "toy_gaussian": _toy}


def build_experiment(cfg: ExperimentConfig, seed=None) -> Experiment:
    model, theta0, x0, extras = BUILDERS[cfg.experiment](cfg)
    return Experiment(cfg.experiment, model, theta0, x0, schedules_from(cfg), soul_config_from(cfg, seed), extras)


def natural_theta(exp: Experiment, theta) -> np.ndarray:
    """Estimate in the units a user reads (undoes the audio log transform)."""
    theta = np.asarray(theta, dtype=float)
    if exp.name == "audio" and exp.model.log_theta:
        return np.exp(theta)
    return theta


def evaluate(exp: Experiment, cfg: ExperimentConfig, theta_hat) -> Dict[str, float]:
    """Experiment-specific diagnostics for a final estimate."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if exp.name == "toy_gaussian":
        return {"mle": exp.model.y, "abs_error": abs(float(theta_hat[0]) - exp.model.y)}
    if exp.name == "audio":
        prob = exp.extras["problem"]
        t = float(natural_theta(exp, theta_hat)[0])
        z_hat = prob.synthesize(map_reconstruct(prob, t).x)
        z_cs = prob.synthesize(map_reconstruct(prob, exp.extras["theta_cs"]).x)
        return {"mse": mse(prob.truth, z_hat), "theta_cs": exp.extras["theta_cs"], "mse_cs": mse(prob.truth, z_cs)}
    if exp.name == "random_effects":
        beta_true = exp.extras["beta_true"]
        return {
            "sigma_hat": float(theta_hat[-1]),
            "support": support_count(theta_hat[:-1], cfg.support_tau),
            "support_true": support_count(beta_true, cfg.support_tau),
        }
    return {}


def blr_prediction_error(cfg: ExperimentConfig, seed=None, n_draws: int = 1000, thin: int = 10) -> Dict[str, float]:
    """Fit theta on a random train split, then predict the held-out labels.

    Labels are predicted by thresholding the posterior-mean probability,
    estimated from ULA draws of beta at the fitted theta on the training data.
    """
    from ..kernel import RngStream
    from ..optimizer import soul_run
    from ..validation.prediction import prediction_error, predictive_labels
    from ..validation.thme import ChainConfig, sample_posterior

    exp = build_experiment(cfg, seed)
    data = exp.extras["data"]
    seed = exp.soul_config.seed
    train, test = train_test_split(data, cfg.train_frac, seed)
    model = BayesianLogisticModel(train, bounds=(float(exp.model.domain.lower[0]), float(exp.model.domain.upper[0])))
    trace = soul_run(model, exp.theta0, np.zeros(train.dim), exp.schedules, exp.soul_config)
    gamma = exp.schedules.gamma(1)
    chain = ChainConfig(gamma=gamma, burnin=max(1000, cfg.chain_burnin), thin=thin)
    draws = sample_posterior(model, trace.theta_hat, n_draws, chain, RngStream(seed, 1), trace.final_latent)
    labels = predictive_labels(draws, test.covariates)
    return {"theta_hat": float(trace.theta_hat[0]), "error": prediction_error(test.labels, labels),
            "n_train": train.n_obs, "n_test": test.n_obs}
