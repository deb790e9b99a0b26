import numpy as np


def diag_design(lam, n=None):
    """Design with ``X^T X = diag(lam)`` and identity singular vectors."""
    lam = np.asarray(lam, dtype=float)
    n = len(lam) if n is None else n
    X = np.zeros((n, len(lam)))
    X[np.arange(len(lam)), np.arange(len(lam))] = np.sqrt(lam)
    return X


def rotated_design(lam, rng, n=None, p=None):
    """Design ``U diag(sqrt(lam)) V^T`` with random orthonormal factors."""
    lam = np.asarray(lam, dtype=float)
    r = len(lam)
    n = r if n is None else n
    p = r if p is None else p
    U = np.linalg.qr(rng.standard_normal((n, n)))[0][:, :r]
    V = np.linalg.qr(rng.standard_normal((p, p)))[0][:, :r]
    return (U * np.sqrt(lam)) @ V.T, U, V
