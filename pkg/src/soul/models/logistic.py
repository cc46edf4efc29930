"""Bayesian logistic regression with an exchangeable Gaussian prior.

beta ~ N(theta 1_d, sigma2 I_d), y_i | beta ~ Bernoulli(s(v_i^T beta)); the
scalar prior mean theta is the parameter estimated by marginal likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core import ParameterDomain


def sigmoid(u):
    """Logistic CDF; stable for large |u|."""
    return expit(u)


def log1pexp(u):
    """log(1 + e^u) without overflow."""
    return np.logaddexp(0.0, u)


@dataclass(frozen=True)
class LogisticData:
    covariates: np.ndarray
    labels: np.ndarray
    sigma2: float = 5.0

    def __post_init__(self):
        v = np.asarray(self.covariates, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if v.ndim != 2 or y.shape != (v.shape[0],):
            raise ValueError("covariates must be (d_y, d) and labels (d_y,)")
        if not np.all(np.isfinite(v)):
            raise ValueError("covariates must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "covariates", v)
        object.__setattr__(self, "labels", y)

    @property
    def n_obs(self) -> int:
        return self.covariates.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1]

    def subset(self, idx) -> "LogisticData":
        return LogisticData(self.covariates[idx], self.labels[idx], self.sigma2)


def _scalar(theta) -> float:
    return float(np.asarray(theta, dtype=float).reshape(-1)[0])


def _check_beta(beta, data: LogisticData) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.dim,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({data.dim},)")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    return beta


def blr_grad_x(beta, theta, data: LogisticData) -> np.ndarray:
    """grad_beta log p(beta | y, theta)."""
    beta = _check_beta(beta, data)
    v = data.covariates
    resid = data.labels - sigmoid(v @ beta)
    return v.T @ resid - (beta - _scalar(theta)) / data.sigma2


def blr_grad_theta(beta, theta, data: LogisticData) -> float:
    """d/dtheta log p(beta, y | theta) = <1, beta - theta 1> / sigma2."""
    beta = _check_beta(beta, data)
    return float(np.sum(beta - _scalar(theta)) / data.sigma2)


def blr_log_likelihood(beta, data: LogisticData) -> float:
    u = data.covariates @ beta
    return float(np.sum(data.labels * u - log1pexp(u)))


def blr_log_joint(beta, theta, data: LogisticData) -> float:
    """log p(y | beta) + log N(beta; theta 1, sigma2 I), normalising constant included."""
    beta = _check_beta(beta, data)
    d = data.dim
    r = beta - _scalar(theta)
    log_prior = -0.5 * (r @ r) / data.sigma2 - 0.5 * d * np.log(2 * np.pi * data.sigma2)
    return blr_log_likelihood(beta, data) + float(log_prior)


class BayesianLogisticModel:
    """Model adaptor; theta is a length-1 vector."""

    dim_theta = 1

    def __init__(self, data: LogisticData, bounds=(-100.0, 100.0)):
        self.data = data
        self.dim_x = data.dim
        self.domain = ParameterDomain.box(bounds[0], bounds[1], 1)
        self._v = data.covariates
        self._vt = np.ascontiguousarray(data.covariates.T)
        self._y = data.labels
        self._inv_s2 = 1.0 / data.sigma2

    # The two hot-path gradients skip input validation.
    def grad_x_log_posterior(self, x, theta):
        resid = self._y - expit(self._v @ x)
        return self._vt @ resid - (x - theta[0]) * self._inv_s2

    def grad_x_log_posterior_batch(self, xs, theta):
        """Row-wise grad_x_log_posterior for a stack of states."""
        resid = self._y - expit(xs @ self._vt)
        return resid @ self._v - (xs - theta[0]) * self._inv_s2

    def grad_theta_log_joint(self, x, theta):
        return np.array([(x.sum() - x.shape[0] * theta[0]) * self._inv_s2])

    def grad_penalty(self, theta):
        return np.zeros(1)

    def log_joint(self, x, theta):
        return blr_log_joint(x, theta, self.data)

    def log_joint_batch(self, xs, theta) -> np.ndarray:
        """log_joint for each row of ``xs``."""
        xs = np.asarray(xs, dtype=float)
        u = xs @ self._v.T
        loglik = (u * self._y).sum(axis=1) - log1pexp(u).sum(axis=1)
        r = xs - float(theta[0])
        d = self.dim_x
        return loglik - 0.5 * (r * r).sum(axis=1) * self._inv_s2 - 0.5 * d * np.log(2 * np.pi * self.data.sigma2)
