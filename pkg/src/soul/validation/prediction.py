import numpy as np
from scipy.special import expit


def predictive_labels(beta_samples, covariates) -> np.ndarray:
    """Threshold the posterior-mean success probability at 1/2."""
    beta_samples = np.atleast_2d(np.asarray(beta_samples, dtype=float))
    prob = expit(np.asarray(covariates, dtype=float) @ beta_samples.T).mean(axis=1)
    return (prob >= 0.5).astype(int)


def prediction_error(y_test, y_hat) -> float:
    """Fraction of mislabelled responses, ||y - y_hat||_1 / n."""
    y_test = np.asarray(y_test, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y_test.shape != y_hat.shape:
        raise ValueError("label vectors must have equal length")
    return float(np.abs(y_test - y_hat).mean())
