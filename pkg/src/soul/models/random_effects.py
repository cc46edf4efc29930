"""Sparse logistic regression with Gaussian random effects.

y_i | x ~ Bernoulli(s(v_i^T beta + sigma z_i^T x)), x ~ N(0, I_d); the
parameter is theta = (beta, sigma) and the Huber penalty acts on beta only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core import ParameterDomain
from .huber import huber, huber_grad
from .logistic import log1pexp


@dataclass(frozen=True)
class RandomEffectsProblem:
    covariates: np.ndarray
    loadings: np.ndarray
    labels: np.ndarray
    lam: float = 30.0
    sigma_floor: float = 1e-5

    def __post_init__(self):
        v = np.asarray(self.covariates, dtype=float)
        z = np.asarray(self.loadings, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if v.ndim != 2 or z.ndim != 2 or v.shape[0] != z.shape[0] or y.shape != (v.shape[0],):
            raise ValueError("covariates (d_y, p), loadings (d_y, d) and labels (d_y,) disagree")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "covariates", v)
        object.__setattr__(self, "loadings", z)
        object.__setattr__(self, "labels", y)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def d(self) -> int:
        return self.loadings.shape[1]


def _split(theta, prob: RandomEffectsProblem):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (prob.p + 1,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({prob.p + 1},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta[:-1], float(theta[-1])


def _residual(x, beta, sigma, prob):
    eta = prob.covariates @ beta + sigma * (prob.loadings @ x)
    return prob.labels - expit(eta), eta


def re_grad_x(x, theta, prob: RandomEffectsProblem) -> np.ndarray:
    beta, sigma = _split(theta, prob)
    x = np.asarray(x, dtype=float)
    r, _ = _residual(x, beta, sigma, prob)
    return sigma * (prob.loadings.T @ r) - x


def re_grad_theta(x, theta, prob: RandomEffectsProblem) -> np.ndarray:
    beta, sigma = _split(theta, prob)
    x = np.asarray(x, dtype=float)
    r, _ = _residual(x, beta, sigma, prob)
    zx = prob.loadings @ x
    return np.concatenate([prob.covariates.T @ r, [zx @ r]])


def re_log_joint(x, theta, prob: RandomEffectsProblem) -> float:
    """log p(y | x, theta) + log N(x; 0, I)."""
    beta, sigma = _split(theta, prob)
    x = np.asarray(x, dtype=float)
    _, eta = _residual(x, beta, sigma, prob)
    loglik = np.sum(prob.labels * eta - log1pexp(eta))
    return float(loglik - 0.5 * (x @ x) - 0.5 * x.shape[0] * np.log(2 * np.pi))


def re_penalty(theta, lam: float) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(np.sum(huber(theta[:-1], lam)))


def re_grad_penalty(theta, lam: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([huber_grad(theta[:-1], lam), [0.0]])


class RandomEffectsModel:
    def __init__(self, prob: RandomEffectsProblem):
        self.prob = prob
        self.dim_x = prob.d
        self.dim_theta = prob.p + 1
        lower = np.full(self.dim_theta, -np.inf)
        lower[-1] = prob.sigma_floor
        self.domain = ParameterDomain(lower, np.full(self.dim_theta, np.inf))
        self._v = prob.covariates
        self._vt = np.ascontiguousarray(prob.covariates.T)
        self._z = prob.loadings
        self._zt = np.ascontiguousarray(prob.loadings.T)
        self._y = prob.labels
        self._cache_key = None
        self._cache_vb = None

    def _fixed_effect(self, theta):
        # The same theta is reused for every chain step of an iteration.
        if self._cache_key is None or not np.array_equal(self._cache_key, theta):
            self._cache_key = theta.copy()
            self._cache_vb = self._v @ theta[:-1]
        return self._cache_vb

    def grad_x_log_posterior(self, x, theta):
        sigma = theta[-1]
        r = self._y - expit(self._fixed_effect(theta) + sigma * (self._z @ x))
        return sigma * (self._zt @ r) - x

    def grad_theta_log_joint(self, x, theta):
        zx = self._z @ x
        r = self._y - expit(self._fixed_effect(theta) + theta[-1] * zx)
        out = np.empty(self.dim_theta)
        out[:-1] = self._vt @ r
        out[-1] = zx @ r
        return out

    def grad_penalty(self, theta):
        return re_grad_penalty(theta, self.prob.lam)

    def log_joint(self, x, theta):
        return re_log_joint(x, theta, self.prob)
