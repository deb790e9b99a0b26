"""PLS1 estimator path as least squares over nested Krylov subspaces.

Two independent constructions are provided: :func:`pls_fit` restricts the
least-squares problem to an orthonormal basis of ``K^k(X^T X, X^T Y)``,
and :func:`pls_fit_nipals` runs the classical weight/score/deflation
iteration. Both return a :class:`PlsPath`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatchError, NumericalError, ValidationError, ZeroSeedError
from .spectral import SpectralDecomposition, SpectralProjections, check_design, decompose

UNDEFINED_RTOL = 1e-12


@dataclass(frozen=True)
class KrylovBasis:
    basis_vectors: np.ndarray
    grade_reached: bool
    raw_seed_norm: float

    @property
    def k(self) -> int:
        return self.basis_vectors.shape[1]


@dataclass(frozen=True)
class PlsPath:
    """Per-step PLS results; row ``k-1`` of each array belongs to step ``k``.

    ``truncated`` is set when fewer steps than requested were produced
    because the Krylov sequence reached its grade.
    """

    betas: np.ndarray
    residual_norms: np.ndarray
    fitted: np.ndarray
    filter_factors: np.ndarray
    response: np.ndarray
    requested: int
    truncated: bool
    method: str = "krylov"
    orthogonality_warning: bool = False
    scores: Optional[np.ndarray] = field(default=None, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k_max(self) -> int:
        return self.betas.shape[0]

    def residual(self, k: int) -> np.ndarray:
        return self.response - self.fitted[k - 1]


@dataclass(frozen=True)
class OlsSolution:
    beta_ols: np.ndarray
    residual_norm: float


def _operators(A):
    if isinstance(A, SpectralDecomposition):
        return A.matvec, A.rmatvec, float(np.sqrt(A.eigenvalues[0]))
    X = check_design(A)
    return (lambda v: X @ v), (lambda u: X.T @ u), float(np.linalg.norm(X))


def krylov_basis(A, Y, k: int, grade_tol: float = 1e-10) -> KrylovBasis:
    """Orthonormal basis of ``K^k(X^T X, X^T Y)``.

    ``A`` is either the design matrix or its :class:`SpectralDecomposition`.
    Each new direction is orthogonalized twice against all previous ones.
    Construction stops early, with ``grade_reached=True``, once the new
    direction keeps less than ``grade_tol`` of its norm after
    orthogonalization.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if grade_tol <= 0:
        raise ValidationError("grade_tol must be positive")
    mat, rmat, xnorm = _operators(A)
    Y = np.asarray(Y, dtype=float)
    seed = rmat(Y)
    seed_norm = float(np.linalg.norm(seed))
    if seed_norm == 0.0 or seed_norm <= 1e-14 * xnorm * np.linalg.norm(Y):
        raise ZeroSeedError("zero seed: X^T Y vanishes, Krylov space undefined")
    p = seed.shape[0]
    Q = np.empty((p, min(k, p)))
    Q[:, 0] = seed / seed_norm
    grade_reached = False
    dim = 1
    while True:
        # one extra application past the last column detects termination
        w = rmat(mat(Q[:, dim - 1]))
        before = np.linalg.norm(w)
        basis = Q[:, :dim]
        for _ in range(2):
            w = w - basis @ (basis.T @ w)
        after = np.linalg.norm(w)
        if after <= grade_tol * before or dim == p:
            grade_reached = True
            break
        if dim == Q.shape[1]:
            break
        Q[:, dim] = w / after
        dim += 1
    return KrylovBasis(basis_vectors=Q[:, :dim].copy(), grade_reached=grade_reached,
                       raw_seed_norm=seed_norm)


def _residual_factors(decomp, Y, fitted):
    """``Q_k(lambda_i) = u_i^T (Y - X beta_k) / p_hat_i``, NaN where undefined."""
    U = decomp.left_vectors
    p_hat = U.T @ Y
    coords = (Y[None, :] - fitted) @ U
    defined = np.abs(p_hat) > UNDEFINED_RTOL * np.linalg.norm(Y)
    q = np.full(coords.shape, np.nan)
    q[:, defined] = coords[:, defined] / p_hat[defined]
    return 1.0 - q


def pls_fit(X, Y, k_max: int, decomp: Optional[SpectralDecomposition] = None,
            grade_tol: float = 1e-10) -> PlsPath:
    """PLS path for steps ``1..min(k_max, grade)``.

    Step ``k`` solves ``min ||Y - X beta||`` over the Krylov subspace of
    dimension ``k``; fitted values are the orthogonal projection of ``Y``
    onto ``X K^k``.
    """
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    X = check_design(X)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (X.shape[0],):
        raise DimensionMismatchError(f"Y has shape {Y.shape}, expected ({X.shape[0]},)")
    if decomp is None:
        decomp = decompose(X)
    kb = krylov_basis(X, Y, k_max, grade_tol)
    V = kb.basis_vectors
    Qt, R = np.linalg.qr(X @ V)
    c = Qt.T @ Y
    K = kb.k
    betas = np.empty((K, X.shape[1]))
    fitted = np.empty((K, X.shape[0]))
    for k in range(1, K + 1):
        coef = solve_triangular(R[:k, :k], c[:k])
        betas[k - 1] = V[:, :k] @ coef
        fitted[k - 1] = Qt[:, :k] @ c[:k]
    res = np.linalg.norm(Y[None, :] - fitted, axis=1)
    return PlsPath(
        betas=betas,
        residual_norms=res,
        fitted=fitted,
        filter_factors=_residual_factors(decomp, Y, fitted),
        response=Y,
        requested=k_max,
        truncated=K < k_max,
        method="krylov",
    )


def pls_fit_nipals(X, Y, k_max: int, decomp: Optional[SpectralDecomposition] = None,
                   grade_tol: float = 1e-10) -> PlsPath:
    """Classical PLS1 (NIPALS) with deflation of ``X`` only.

    Sets ``orthogonality_warning`` (and emits a warning) when the scores
    lose mutual orthogonality beyond 1e-6.
    """
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    X = check_design(X)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (X.shape[0],):
        raise DimensionMismatchError(f"Y has shape {Y.shape}, expected ({X.shape[0]},)")
    if decomp is None:
        decomp = decompose(X)
    n, p = X.shape
    Xk = X.copy()
    W, P, T, q = [], [], [], []
    w0 = None
    for _ in range(min(k_max, p)):
        w = Xk.T @ Y
        nw = np.linalg.norm(w)
        if w0 is None:
            if nw == 0.0 or nw <= 1e-14 * np.linalg.norm(X) * np.linalg.norm(Y):
                raise ZeroSeedError("zero seed: X^T Y vanishes, Krylov space undefined")
            w0 = nw
        elif nw <= grade_tol * w0:
            break
        w = w / nw
        t = Xk @ w
        tt = t @ t
        if tt <= (grade_tol * w0) ** 2:
            break
        loading = Xk.T @ t / tt
        Xk = Xk - np.outer(t, loading)
        W.append(w)
        P.append(loading)
        T.append(t)
        q.append(t @ Y / tt)
    W, P, T, q = (np.array(a) for a in (W, P, T, q))
    K = len(q)
    betas = np.empty((K, p))
    fitted = np.empty((K, n))
    for k in range(1, K + 1):
        Wk, Pk = W[:k].T, P[:k].T
        betas[k - 1] = Wk @ np.linalg.solve(Pk.T @ Wk, q[:k])
        fitted[k - 1] = T[:k].T @ q[:k]
    norms = np.linalg.norm(T, axis=1)
    gram = (T @ T.T) / np.outer(norms, norms)
    off = np.abs(gram - np.diag(np.diag(gram)))
    warn = bool(K > 1 and off.max() > 1e-6)
    if warn:
        warnings.warn(f"NIPALS scores lost orthogonality (max cosine {off.max():.2e})",
                      RuntimeWarning, stacklevel=2)
    return PlsPath(
        betas=betas,
        residual_norms=np.linalg.norm(Y[None, :] - fitted, axis=1),
        fitted=fitted,
        filter_factors=_residual_factors(decomp, Y, fitted),
        response=Y,
        requested=k_max,
        truncated=K < k_max,
        method="nipals",
        orthogonality_warning=warn,
        scores=T.T,
        weights=W.T,
    )


def ols_fit(X, Y, decomp: Optional[SpectralDecomposition] = None) -> OlsSolution:
    """Minimum-norm least squares through the (truncated) pseudo-inverse."""
    X = check_design(X)
    Y = np.asarray(Y, dtype=float)
    if decomp is None:
        decomp = decompose(X)
    coords = decomp.left_vectors.T @ Y
    beta = decomp.right_vectors @ (coords / decomp.singular_values)
    return OlsSolution(beta_ols=beta, residual_norm=float(np.linalg.norm(Y - X @ beta)))


def filter_factors(path: PlsPath, proj: SpectralProjections,
                   decomp: Optional[SpectralDecomposition] = None,
                   rtol: float = 1e-7) -> np.ndarray:
    """Filter factors ``f_i^k = 1 - Q_k(lambda_i)`` as a ``K x r`` array.

    Entries where ``|p_hat_i| <= 1e-12 ||Y||`` are NaN (undefined). When
    ``decomp`` is given, checks that ``beta_k = sum_i f_i^k p_hat_i /
    sqrt(lambda_i) v_i`` to relative accuracy ``rtol`` and raises
    :class:`NumericalError` otherwise.
    """
    f = path.filter_factors
    if f.shape[1] != proj.p_hat.shape[0]:
        raise DimensionMismatchError("path and projections disagree on the rank")
    if decomp is not None:
        comp = np.where(np.isnan(f), 0.0, f) * (proj.p_hat / decomp.singular_values)
        recon = comp @ decomp.right_vectors.T
        err = np.linalg.norm(recon - path.betas, axis=1)
        scale = np.maximum(np.linalg.norm(path.betas, axis=1), np.finfo(float).tiny)
        worst = float(np.max(err / scale))
        if worst > rtol:
            raise NumericalError(f"filter-factor reconstruction off by {worst:.2e} (relative)")
    return f
