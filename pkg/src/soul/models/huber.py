import numpy as np


def huber(u, lam):
    """Huber function: u^2/2 for |u| <= lam, lam(|u| - lam/2) beyond."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    return np.where(a <= lam, 0.5 * u * u, lam * (a - 0.5 * lam))


def huber_grad(u, lam):
    if lam <= 0:
        raise ValueError("lam must be positive")
    u = np.asarray(u, dtype=float)
    return np.clip(u, -lam, lam)
