"""Finite-difference and quadrature oracles for every model gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..kernel import RngStream
from ..models.audio import acs_grad_theta, acs_grad_x, acs_log_joint, log_normalizer
from ..models.huber import huber
from ..models.logistic import LogisticData, blr_grad_theta, blr_grad_x, blr_log_joint
from ..models.random_effects import re_grad_theta, re_grad_x, re_log_joint
from ..validation.checks import gradcheck
from .generators import gen_audio_problem, gen_random_effects_problem


@dataclass
class OracleResult:
    name: str
    max_rel_err: float
    n_points: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _away_from_knee(x, lam, margin, rng):
    # Central differences straddling |u| = lam see the kink in the Huber gradient.
    x = x.copy()
    bad = np.abs(np.abs(x) - lam) <= margin
    while bad.any():
        x[bad] = rng.uniform(-3 * lam, 3 * lam, size=bad.sum())
        bad = np.abs(np.abs(x) - lam) <= margin
    return x


def gradient_suite(n_points: int = 100, seed: int = 0, h: float = 1e-5, tol: float = 1e-5):
    """Check the six analytic gradients at ``n_points`` random points each.

    The problems are small instances from the generators so the suite runs
    in seconds; the formulas do not depend on scale.
    """
    stream = RngStream(seed)
    results = []

    # logistic regression on synthetic standardised covariates
    rng = stream.substream(0).generator
    v = np.hstack([rng.standard_normal((60, 4)), np.ones((60, 1))])
    labels = (rng.uniform(size=60) < 0.5).astype(float)
    data = LogisticData(v, labels, 5.0)
    errs_x, errs_t = [], []
    for _ in range(n_points):
        beta = rng.normal(0.0, 1.0, size=data.dim)
        theta = rng.uniform(-2.0, 2.0)
        errs_x.append(gradcheck(lambda b: blr_log_joint(b, theta, data), lambda b: blr_grad_x(b, theta, data), beta, h))
        errs_t.append(gradcheck(lambda t: blr_log_joint(beta, t[0], data),
                                lambda t: np.array([blr_grad_theta(beta, t[0], data)]), [theta], h))
    results.append(OracleResult("blr_grad_x", max(errs_x), n_points, tol))
    results.append(OracleResult("blr_grad_theta", max(errs_t), n_points, tol))

    # audio at a reduced size
    rng = stream.substream(1).generator
    prob = gen_audio_problem(seed, ell=400, d_notes=5, d_positions=4, p=40, sparsity=3)
    lam = prob.lam
    errs_x, errs_t = [], []
    for _ in range(n_points):
        scale = np.where(rng.uniform(size=prob.dim) < 0.5, 2 * lam, 0.5)
        x = _away_from_knee(rng.uniform(-1.0, 1.0, size=prob.dim) * scale, lam, 2 * h, rng)
        theta = float(np.exp(rng.uniform(0.0, np.log(1e6))))
        errs_x.append(gradcheck(lambda z: acs_log_joint(z, theta, prob), lambda z: acs_grad_x(z, theta, prob), x, h))
        # Only the prior depends on theta. theta spans six decades, so the
        # step is relative to theta.
        errs_t.append(gradcheck(lambda t: acs_log_prior(x, t[0], prob),
                                lambda t: np.array([acs_grad_theta(x, t[0], prob)]), [theta], h * theta))
    results.append(OracleResult("acs_grad_x", max(errs_x), n_points, tol))
    results.append(OracleResult("acs_grad_theta", max(errs_t), n_points, tol))

    # random effects at a reduced size
    rng = stream.substream(2).generator
    prob, _, _ = gen_random_effects_problem(seed, d_y=50, p=20, d=3, zero_frac=0.5)
    errs_x, errs_t = [], []
    for _ in range(n_points):
        x = rng.standard_normal(prob.d)
        theta = np.concatenate([rng.normal(0.0, 2.0, size=prob.p), [rng.uniform(0.05, 2.0)]])
        errs_x.append(gradcheck(lambda z: re_log_joint(z, theta, prob), lambda z: re_grad_x(z, theta, prob), x, h))
        errs_t.append(gradcheck(lambda t: re_log_joint(x, t, prob), lambda t: re_grad_theta(x, t, prob), theta, h))
    results.append(OracleResult("re_grad_x", max(errs_x), n_points, tol))
    results.append(OracleResult("re_grad_theta", max(errs_t), n_points, tol))
    return results


def acs_log_prior(x, theta: float, prob) -> float:
    return float(-theta * np.sum(huber(x, prob.lam)) - x.shape[0] * log_normalizer(theta, prob.lam))


def normalizer_quadrature_error(thetas, lam: float) -> float:
    """Largest relative gap between z(theta) in closed form and by quadrature."""
    worst = 0.0
    for theta in thetas:
        core, _ = integrate.quad(lambda u: np.exp(-theta * huber(u, lam)), 0.0, lam, epsabs=0, epsrel=1e-13)
        # the integrand has decayed by e^-60 past this point
        end = lam + 60.0 / (theta * lam)
        tail, _ = integrate.quad(lambda u: np.exp(-theta * huber(u, lam)), lam, end, epsabs=0, epsrel=1e-13, limit=200)
        numeric = 2.0 * (core + tail)
        closed = np.exp(log_normalizer(theta, lam))
        worst = max(worst, abs(closed - numeric) / numeric)
    return float(worst)
