"""Conjugate Gaussian toy model with a closed-form marginal likelihood.

x | theta ~ N(theta, prior_var), y | x ~ N(x, noise_var), one scalar y, so
y | theta ~ N(theta, prior_var + noise_var) and the MLE is theta* = y.
"""
from __future__ import annotations

import numpy as np

from ..core import ParameterDomain


class ConjugateGaussianModel:
    dim_x = 1
    dim_theta = 1

    def __init__(self, y: float, prior_var: float = 1.0, noise_var: float = 1.0, bounds=(-1e3, 1e3)):
        if prior_var <= 0 or noise_var <= 0:
            raise ValueError("variances must be positive")
        self.y = float(y)
        self.prior_var = float(prior_var)
        self.noise_var = float(noise_var)
        self.domain = ParameterDomain.box(bounds[0], bounds[1], 1)

    def grad_x_log_posterior(self, x, theta):
        return -(x - theta[0]) / self.prior_var + (self.y - x) / self.noise_var

    def grad_x_log_posterior_batch(self, xs, theta):
        return -(xs - theta[0]) / self.prior_var + (self.y - xs) / self.noise_var

    def grad_theta_log_joint(self, x, theta):
        return (x - theta[0]) / self.prior_var

    def grad_penalty(self, theta):
        return np.zeros(1)

    def log_joint(self, x, theta):
        x = float(np.asarray(x).reshape(-1)[0])
        t = float(np.asarray(theta).reshape(-1)[0])
        return float(
            -0.5 * (x - t) ** 2 / self.prior_var - 0.5 * np.log(2 * np.pi * self.prior_var)
            - 0.5 * (self.y - x) ** 2 / self.noise_var - 0.5 * np.log(2 * np.pi * self.noise_var)
        )

    def log_joint_batch(self, xs, theta) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(len(xs), -1)[:, 0]
        t = float(np.asarray(theta).reshape(-1)[0])
        return (
            -0.5 * (xs - t) ** 2 / self.prior_var - 0.5 * np.log(2 * np.pi * self.prior_var)
            - 0.5 * (self.y - xs) ** 2 / self.noise_var - 0.5 * np.log(2 * np.pi * self.noise_var)
        )

    def log_marginal(self, theta) -> float:
        v = self.prior_var + self.noise_var
        return float(-0.5 * (self.y - theta) ** 2 / v - 0.5 * np.log(2 * np.pi * v))

    def posterior(self, theta):
        """Mean and variance of x | y, theta."""
        prec = 1.0 / self.prior_var + 1.0 / self.noise_var
        return (theta / self.prior_var + self.y / self.noise_var) / prec, 1.0 / prec
