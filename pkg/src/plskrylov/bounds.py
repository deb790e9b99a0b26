"""Chebyshev minimax machinery and risk / prediction-error bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import HypothesisViolation, ValidationError
from .respoly import value_envelope
from .spectral import SpectralDecomposition, SpectralProjections, condition_ratio

_RECURRENCE_LIMIT = 1.5


def chebyshev_value(k: int, x: float) -> float:
    """Chebyshev polynomial of the first kind ``C_k(x)``.

    Three-term recurrence for ``|x| <= 1.5``; ``cosh(k arccosh |x|)`` beyond.
    """
    if k < 0:
        raise ValidationError("degree must be nonnegative")
    x = float(x)
    if abs(x) <= _RECURRENCE_LIMIT:
        prev, cur = 1.0, x
        if k == 0:
            return prev
        for _ in range(k - 1):
            prev, cur = cur, 2.0 * x * cur - prev
        return cur
    sign = -1.0 if (x < 0 and k % 2) else 1.0
    return sign * math.cosh(k * math.acosh(abs(x)))


def chem_factor(C: float, k: int) -> float:
    """``((sqrt(C) - 1) / (sqrt(C) + 1))^k``."""
    s = math.sqrt(C)
    return ((s - 1.0) / (s + 1.0)) ** k


@dataclass(frozen=True)
class ChebyshevEnvelope:
    interval: tuple
    k: int
    minimax_value: float


def minimax_envelope(alpha: float, beta: float, k: int) -> ChebyshevEnvelope:
    """Smallest achievable ``max_{[alpha, beta]} |P|`` over degree-``k`` ``P`` with ``P(0) = 1``.

    Equals ``1 / |C_k((alpha + beta) / (beta - alpha))|``, i.e.
    ``2 rho^k / (1 + rho^{2k})`` with ``rho = (sqrt(C) - 1)/(sqrt(C) + 1)``,
    ``C = beta / alpha``.
    """
    if not 0 < alpha <= beta:
        raise ValidationError("need 0 < alpha <= beta")
    if alpha == beta:
        return ChebyshevEnvelope((alpha, beta), k, 0.0)
    mu = 0.5 * (alpha + beta)
    value = 1.0 / abs(chebyshev_value(k, 2.0 * (0.0 - mu) / (beta - alpha)))
    return ChebyshevEnvelope((alpha, beta), k, value)


@dataclass(frozen=True)
class RiskBound:
    k: int
    chem_factor: float
    signal: float
    noise_var: float
    bound: float


def empirical_risk_bound(decomp: SpectralDecomposition, beta_star, sigma2: float, k: int,
                         n: Optional[int] = None) -> RiskBound:
    """Upper bound on ``E[(1/n) ||Y - X beta_k||^2]``.

    ``rho^{2k} (||X beta*||^2 / n + sigma^2)`` with ``rho`` built from the
    condition ratio of the retained spectrum.
    """
    if k < 0:
        raise ValidationError("k must be nonnegative")
    n = decomp.shape[0] if n is None else n
    fit = decomp.matvec(np.asarray(beta_star, dtype=float))
    signal = float(fit @ fit) / n
    factor = chem_factor(condition_ratio(decomp), 2 * k)
    return RiskBound(k=k, chem_factor=factor, signal=signal, noise_var=float(sigma2),
                     bound=factor * (signal + sigma2))


class BoundConstants(NamedTuple):
    """Free constants in the prediction-error bound."""

    C: float = 2.0
    C_tilde: float = 1.0
    L: Optional[float] = None


@dataclass(frozen=True)
class PredictionBound:
    k: int
    term_regularization: float
    term_subspace: float
    term_subspace_unsquared: float
    W_diagonal: np.ndarray
    constants: BoundConstants

    @property
    def total(self) -> float:
        return self.term_regularization + self.term_subspace


def prediction_error_bound(decomp: SpectralDecomposition, proj: SpectralProjections, k: int,
                           constants: BoundConstants = BoundConstants(),
                           n: Optional[int] = None) -> PredictionBound:
    """Both terms of the high-probability prediction-error bound.

    ``term_subspace`` uses the squared factor ``(1 + C sqrt(log n/(nL)))^2``;
    ``term_subspace_unsquared`` the unsquared variant.

    Raises
    ------
    HypothesisViolation
        If ``L <= 0`` or some ``p_i^2 < L``.
    """
    if proj.p_clean is None:
        raise ValidationError("noise-free projections (p_clean) are required")
    n = decomp.shape[0] if n is None else n
    p2 = proj.p_clean**2
    L = float(p2.min()) if constants.L is None else float(constants.L)
    if L <= 0:
        raise HypothesisViolation(f"H.2 violated: L={L} must be positive")
    bad = np.nonzero(p2 < L)[0]
    if bad.size:
        raise HypothesisViolation(f"H.2 violated at indices {bad.tolist()}", bad.tolist())
    constants = constants._replace(L=L)
    rho2k = chem_factor(condition_ratio(decomp), 2 * k)
    signal = float(np.sum(p2))
    log_n = math.log(n)
    term_reg = (2 * rho2k + 4 * log_n / (n * L) * (1 + rho2k)) * signal / n
    W = np.array([value_envelope(decomp, k, i) ** 2 for i in range(decomp.rank)])
    weighted = float(np.sum(W * p2))
    lead = 4 * k**2 * constants.C_tilde**2 / L * log_n / n**2
    corr = 1 + constants.C * math.sqrt(log_n / (n * L))
    return PredictionBound(
        k=k,
        term_regularization=term_reg,
        term_subspace=lead * corr**2 * weighted,
        term_subspace_unsquared=lead * corr * weighted,
        W_diagonal=W,
        constants=constants,
    )


class Decomposition(NamedTuple):
    lhs: float
    term_projection: float
    term_subspace: float

    @property
    def violation(self) -> float:
        return max(0.0, self.lhs - self.term_projection - self.term_subspace)


def prediction_decomposition(decomp: SpectralDecomposition, Y, beta_star, fitted_k,
                             noise_free_factors) -> Decomposition:
    """Two-term split of the prediction error at one step.

    ``fitted_k`` is ``X beta_k`` from the noisy path; ``noise_free_factors``
    are ``1 - Q*_k(lambda_i)`` from the noise-free path. Returns
    ``(1/n)||X beta* - X beta_k||^2`` and the two right-hand terms
    ``(2/n)||X beta* - X P*_k(X^T X) X^T Y||^2`` and
    ``(2/n)||X P*_k(X^T X) X^T Y - X beta_k||^2``.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    signal = decomp.matvec(np.asarray(beta_star, dtype=float))
    U = decomp.left_vectors
    oracle_fit = U @ (np.asarray(noise_free_factors) * (U.T @ Y))
    lhs = float(np.sum((signal - fitted_k) ** 2)) / n
    t1 = 2.0 * float(np.sum((signal - oracle_fit) ** 2)) / n
    t2 = 2.0 * float(np.sum((oracle_fit - fitted_k) ** 2)) / n
    return Decomposition(lhs, t1, t2)


def concentration_event_rate(n: int, sigma_n: float, reps: int, seed=None) -> float:
    """Fraction of draws with ``max_i |eps_i| <= sqrt(log n / n)``.

    ``eps`` has ``n`` i.i.d. ``N(0, sigma_n^2)`` coordinates.
    """
    if reps < 100:
        raise ValidationError("reps must be >= 100")
    if sigma_n == 0:
        return 1.0
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((reps, n)) * sigma_n
    thresh = math.sqrt(math.log(n) / n)
    return float(np.mean(np.max(np.abs(eps), axis=1) <= thresh))
