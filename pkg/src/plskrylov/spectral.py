"""Singular value decomposition of the design and spectral projections.

Eigenvalues are those of ``X.T @ X`` (squared singular values), sorted in
nonincreasing order. Every other module works in these coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, RankDeficientError, ValidationError

TIE_RTOL = 1e-9


def check_design(X, standardized: bool = False, atol: float = 1e-10) -> np.ndarray:
    """Validate a design matrix and return it as a float64 array.

    With ``standardized=True`` every column must have mean 0 and mean
    square 1 (within ``atol``).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"design matrix must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 2 or p < 1:
        raise ValidationError(f"design matrix needs n >= 2 and p >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("design matrix has non-finite entries")
    if standardized:
        means = X.mean(axis=0)
        msq = (X**2).mean(axis=0)
        if np.max(np.abs(means)) > atol or np.max(np.abs(msq - 1.0)) > atol:
            raise ValidationError("design matrix is not centered and normalized")
    return X


def standardize(X) -> np.ndarray:
    """Center each column and scale it to unit mean square."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    scale = np.sqrt((Xc**2).mean(axis=0))
    scale[scale == 0] = 1.0
    return Xc / scale


@dataclass(frozen=True)
class SpectralDecomposition:
    """Truncated SVD ``X = U diag(sqrt(lambda)) V^T`` on the retained rank."""

    eigenvalues: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def singular_values(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def shape(self) -> tuple:
        return (self.left_vectors.shape[0], self.right_vectors.shape[0])

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``X @ v`` through the factors."""
        return self.left_vectors @ (self.singular_values * (self.right_vectors.T @ v))

    def rmatvec(self, u: np.ndarray) -> np.ndarray:
        """``X.T @ u`` through the factors."""
        return self.right_vectors @ (self.singular_values * (self.left_vectors.T @ u))


@dataclass(frozen=True)
class SpectralProjections:
    """Coordinates of the response (and optionally its parts) on the spectrum.

    ``p_hat[i] = u_i^T Y``; ``p_clean[i] = u_i^T X beta*``;
    ``eps_tilde[i] = u_i^T eps``; ``beta_tilde[i] = v_i^T beta*``.
    """

    eigenvalues: np.ndarray
    p_hat: np.ndarray
    y_norm: float
    p_clean: Optional[np.ndarray] = None
    eps_tilde: Optional[np.ndarray] = None
    beta_tilde: Optional[np.ndarray] = None


def _fix_signs(U: np.ndarray, V: np.ndarray) -> None:
    # largest-magnitude entry of each u_i made positive; v_i flipped with it
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U *= signs
    V *= signs


def decompose(X, rank_tol: float = 1e-12) -> SpectralDecomposition:
    """SVD of ``X`` truncated to eigenvalues above ``rank_tol * lambda_1``.

    Raises
    ------
    RankDeficientError
        If no eigenvalue survives (zero matrix).
    """
    if rank_tol <= 0:
        raise ValidationError("rank_tol must be positive")
    X = check_design(X)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    lam = s**2
    if lam.size == 0 or lam[0] == 0.0:
        raise RankDeficientError("rank deficient to zero: all eigenvalues vanish")
    keep = lam > rank_tol * lam[0]
    U = np.array(U[:, keep])
    V = np.array(Vt[keep].T)
    _fix_signs(U, V)
    return SpectralDecomposition(eigenvalues=lam[keep], left_vectors=U, right_vectors=V)


def project(
    decomp: SpectralDecomposition,
    Y,
    beta_star=None,
    eps=None,
) -> SpectralProjections:
    """Project the response and the optional model parts onto the spectrum."""
    n, p = decomp.shape
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (n,):
        raise DimensionMismatchError(f"Y has shape {Y.shape}, expected ({n},)")
    U, V = decomp.left_vectors, decomp.right_vectors
    p_clean = beta_tilde = eps_tilde = None
    if beta_star is not None:
        beta_star = np.asarray(beta_star, dtype=float)
        if beta_star.shape != (p,):
            raise DimensionMismatchError(f"beta_star has shape {beta_star.shape}, expected ({p},)")
        beta_tilde = V.T @ beta_star
        p_clean = U.T @ decomp.matvec(beta_star)
    if eps is not None:
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (n,):
            raise DimensionMismatchError(f"eps has shape {eps.shape}, expected ({n},)")
        eps_tilde = U.T @ eps
    return SpectralProjections(
        eigenvalues=decomp.eigenvalues,
        p_hat=U.T @ Y,
        y_norm=float(np.linalg.norm(Y)),
        p_clean=p_clean,
        eps_tilde=eps_tilde,
        beta_tilde=beta_tilde,
    )


def tie_groups(eigenvalues, rtol: float = TIE_RTOL) -> list:
    """Group indices of a nonincreasing eigenvalue list into ties.

    Consecutive values closer than ``rtol`` (relative to the larger one)
    belong to the same group.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    groups = []
    for i, val in enumerate(lam):
        if groups and abs(lam[groups[-1][0]] - val) <= rtol * abs(lam[groups[-1][0]]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def relevant_count(proj: SpectralProjections, tol: float = 0.0) -> int:
    """Number of distinct relevant eigenvalues.

    An eigenvalue (tie group) is relevant when it is positive and the
    response has a component larger than ``tol * ||Y||`` along its
    eigenspace. Equals the grade of ``X^T Y`` with respect to ``X^T X``.
    """
    if tol < 0:
        raise ValidationError("tol must be nonnegative")
    thresh = tol * proj.y_norm
    count = 0
    for g in tie_groups(proj.eigenvalues):
        if proj.eigenvalues[g[0]] > 0 and np.sqrt(np.sum(proj.p_hat[g] ** 2)) > thresh:
            count += 1
    return count


def condition_ratio(decomp: SpectralDecomposition) -> float:
    """Ratio ``lambda_1 / lambda_r`` of the extreme retained eigenvalues."""
    lam = decomp.eigenvalues
    return float(lam[0] / lam[-1])


def write_matrix(path, A) -> None:
    """Write a dense matrix as ``"n p"`` followed by rows at 17 significant digits."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, p = A.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {p}\n")
        for row in A:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValidationError(f"{path}: header must be 'n p'")
        n, p = int(header[0]), int(header[1])
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != p:
                raise ValidationError(f"{path}: line {lineno} has {len(vals)} entries, expected {p}")
            rows.append([float(v) for v in vals])
    if len(rows) != n:
        raise ValidationError(f"{path}: expected {n} rows, found {len(rows)}")
    return np.array(rows, dtype=float).reshape(n, p)
