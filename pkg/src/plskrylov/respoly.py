"""Residual polynomials of the PLS path.

``Q_k`` is the degree-``k`` polynomial with ``Q_k(0) = 1`` such that
``Y - X beta_k = Q_k(X X^T) Y``. It is computed here by three independent
routes:

* from a fitted path (residual coordinates divided by ``p_hat``),
* from the moments of the discrete spectral measure (Hankel system),
* as a weighted average over eigenvalue subsets with squared-Vandermonde
  weights.

Indices of eigenvalues are 0-based throughout; subsets are stored with
strictly decreasing indices in lexicographically decreasing order.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CombinatorialCapError,
    DegenerateMeasureError,
    DimensionMismatchError,
    IllConditionedMomentsError,
    NumericalError,
    ValidationError,
)
from .pls_core import PlsPath
from .spectral import TIE_RTOL, SpectralDecomposition, SpectralProjections, tie_groups

DEFAULT_CAP = 2_000_000
_CHUNK = 1 << 15


@dataclass(frozen=True)
class DiscreteMeasure:
    """Point masses ``sum_j lambda_j p_j^2 delta_{lambda_j}`` on distinct eigenvalues."""

    support: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def moment(self, j: int) -> float:
        return float(np.sum(self.masses * self.support**j))

    def inner(self, f_vals, g_vals) -> float:
        return float(np.sum(self.masses * f_vals * g_vals))


@dataclass(frozen=True)
class ResidualPolynomial:
    """A residual polynomial with constant term one.

    ``coefficients`` are monomial coefficients ``a_0..a_k`` (``None`` when
    they could not be recovered). ``values_on_spectrum`` holds
    ``Q(spectrum[i])`` as computed by the producing route. When Newton
    data (``nodes``, ``divided_differences``) is present, evaluation uses
    it instead of the monomial form.
    """

    degree: int
    coefficients: Optional[np.ndarray] = None
    values_on_spectrum: Optional[np.ndarray] = None
    spectrum: Optional[np.ndarray] = None
    nodes: Optional[np.ndarray] = None
    divided_differences: Optional[np.ndarray] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.nodes is not None:
            dd, nodes = self.divided_differences, self.nodes
            out = np.full(x.shape, dd[-1])
            for j in range(len(dd) - 2, -1, -1):
                out = out * (x - nodes[j]) + dd[j]
            return out
        if self.coefficients is None:
            raise NumericalError("polynomial has no coefficients to evaluate off the spectrum")
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def values_at(self, points) -> np.ndarray:
        """Values at ``points``, preferring stored spectrum values on matches."""
        points = np.asarray(points, dtype=float)
        out = np.empty(points.shape)
        for idx, x in enumerate(points):
            hit = None
            if self.spectrum is not None:
                close = np.nonzero(np.abs(self.spectrum - x) <= TIE_RTOL * abs(x))[0]
                close = [c for c in close if np.isfinite(self.values_on_spectrum[c])]
                if close:
                    hit = self.values_on_spectrum[close[0]]
            out[idx] = hit if hit is not None else self(x)
        return out

    def to_line(self) -> str:
        if self.coefficients is None:
            raise NumericalError("no coefficients to serialize")
        return f"{self.degree}; " + " ".join(f"{a:.17g}" for a in self.coefficients)

    @classmethod
    def from_line(cls, line: str) -> "ResidualPolynomial":
        head, _, tail = line.partition(";")
        coeffs = np.array([float(v) for v in tail.split()])
        degree = int(head)
        if coeffs.shape[0] != degree + 1:
            raise ValidationError(f"degree {degree} needs {degree + 1} coefficients")
        return cls(degree=degree, coefficients=coeffs)


@dataclass(frozen=True)
class SubsetWeights:
    """Subsets of ``k`` eigenvalue indices and their normalized weights."""

    index_subsets: np.ndarray
    weights: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subset_indices", "weight"])
            for subset, weight in zip(self.index_subsets, self.weights):
                w.writerow([" ".join(str(int(j)) for j in subset), f"{weight:.17g}"])


def write_polynomials(path, polys: Sequence[ResidualPolynomial]) -> None:
    with open(path, "w") as fh:
        for poly in polys:
            fh.write(poly.to_line() + "\n")


def read_polynomials(path) -> list:
    with open(path) as fh:
        return [ResidualPolynomial.from_line(line) for line in fh if line.strip()]


# --- measure -------------------------------------------------------------


def build_measure(decomp: SpectralDecomposition, p_vec, tie_rtol: float = TIE_RTOL) -> DiscreteMeasure:
    """Spectral measure with masses ``lambda_i p_i^2``, merged over ties."""
    lam = decomp.eigenvalues
    p_vec = np.asarray(p_vec, dtype=float)
    if p_vec.shape != lam.shape:
        raise DimensionMismatchError(f"p_vec has shape {p_vec.shape}, expected {lam.shape}")
    groups = tie_groups(lam, tie_rtol)
    support = np.array([lam[g].mean() for g in groups])
    masses = np.array([np.sum(lam[g] * p_vec[g] ** 2) for g in groups])
    if not np.any(masses > 0):
        raise DegenerateMeasureError("degenerate measure: all masses vanish")
    return DiscreteMeasure(support=support, masses=masses)


# --- route 1: from a fitted path -----------------------------------------


def _select_nodes(lam, p_hat, y_norm, k, sep=0.01):
    groups = tie_groups(lam)
    cand = [lam[g[0]] for g in groups
            if np.sqrt(np.sum(p_hat[g] ** 2)) > 1e-12 * y_norm]
    picked = []
    for x in cand:  # nonincreasing
        if not picked or picked[-1] - x >= sep * picked[-1]:
            picked.append(x)
        if len(picked) == k:
            return picked
    if len(cand) >= k:
        return cand[:k]
    return None


def _newton(nodes, values):
    nodes = np.asarray(nodes, dtype=float)
    dd = np.array(values, dtype=float)
    m = len(nodes)
    for j in range(1, m):
        dd[j:] = (dd[j:] - dd[j - 1:-1]) / (nodes[j:] - nodes[:m - j])
    return dd


def _newton_to_monomial(nodes, dd):
    coeffs = np.array([dd[-1]])
    for j in range(len(dd) - 2, -1, -1):
        # coeffs * (x - nodes[j]) + dd[j]
        shifted = np.concatenate([[0.0], coeffs])
        shifted[:-1] -= nodes[j] * coeffs
        shifted[0] += dd[j]
        coeffs = shifted
    return coeffs


def residual_poly_from_fit(path: PlsPath, proj: SpectralProjections, k: int) -> ResidualPolynomial:
    """``Q_k`` read off a fitted path.

    Values come from the residual coordinates. Coefficients are recovered by
    Newton interpolation through the origin (value 1) and the ``k`` largest
    well-separated relevant eigenvalues; they are ``None`` when fewer than
    ``k`` distinct relevant eigenvalues exist.
    """
    if not 1 <= k <= path.k_max:
        raise ValidationError(f"k={k} outside the fitted path 1..{path.k_max}")
    values = 1.0 - path.filter_factors[k - 1]
    lam = proj.eigenvalues
    nodes = _select_nodes(lam, proj.p_hat, proj.y_norm, k)
    coeffs = dd = full_nodes = None
    if nodes is not None:
        lookup = {float(x): float(values[np.nonzero(lam == x)[0][0]]) for x in nodes}
        full_nodes = np.concatenate([[0.0], nodes])
        dd = _newton(full_nodes, [1.0] + [lookup[float(x)] for x in nodes])
        coeffs = _newton_to_monomial(full_nodes, dd)
        coeffs[0] = 1.0
    return ResidualPolynomial(degree=k, coefficients=coeffs, values_on_spectrum=values,
                              spectrum=lam.copy(), nodes=full_nodes, divided_differences=dd)


# --- route 2: moments / Hankel system ------------------------------------


def _hankel_float(measure, k, tol):
    s = measure.support.max()
    x = measure.support / s
    m = np.array([np.sum(measure.masses * x**j) for j in range(2 * k)])
    H = np.array([[m[j + l + 1] for l in range(k)] for j in range(k)])
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1.0 / tol:
        raise IllConditionedMomentsError(k, cond)
    alpha = np.linalg.solve(H, -m[:k])
    return np.concatenate([[1.0], alpha / s ** np.arange(1, k + 1)])


def _solve_exact(A, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise IllConditionedMomentsError(n, math.inf)
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                fac = M[r][col] / pv
                M[r] = [a - fac * c for a, c in zip(M[r], M[col])]
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = M[i][n] - sum(M[i][j] * x[j] for j in range(i + 1, n))
        x[i] = acc / M[i][i]
    return x


def hankel_coefficients_exact(support, masses, k: int) -> list:
    """Exact rational coefficients ``[1, alpha_1, ..., alpha_k]``.

    Inputs are converted to :class:`fractions.Fraction` without rounding
    (floats are exact binary rationals), so the result is the exact
    solution for the supplied measure.
    """
    sup = [Fraction(x) for x in support]
    mas = [Fraction(m) for m in masses]
    m = []
    powers = [Fraction(1)] * len(sup)
    for _ in range(2 * k):
        m.append(sum(w * pw for w, pw in zip(mas, powers)))
        powers = [pw * x for pw, x in zip(powers, sup)]
    H = [[m[j + l + 1] for l in range(k)] for j in range(k)]
    alpha = _solve_exact(H, [-m[j] for j in range(k)])
    return [Fraction(1)] + alpha


def _horner_exact(coeffs, x):
    x = Fraction(x)
    acc = Fraction(0)
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def residual_poly_moments(measure: DiscreteMeasure, k: int, exact: bool = False,
                          tol: float = 1e-10, spectrum=None) -> ResidualPolynomial:
    """``Q_k`` from the ``k x k`` Hankel system of measure moments.

    The system is ``sum_l alpha_l m_{j+l} = -m_j`` for ``j = 0..k-1``.
    The floating-point solve is refused (:class:`IllConditionedMomentsError`)
    when the condition estimate exceeds ``1/tol``; ``exact=True`` solves in
    rational arithmetic instead. Values on ``spectrum`` (default: the
    measure support) are attached.
    """
    npos = int(np.sum(measure.masses > 0))
    if not 1 <= k <= npos:
        raise ValidationError(f"k={k} needs 1 <= k <= {npos} (positive-mass support points)")
    pts = measure.support if spectrum is None else np.asarray(spectrum, dtype=float)
    if exact:
        coeffs = hankel_coefficients_exact(measure.support, measure.masses, k)
        values = np.array([float(_horner_exact(coeffs, x)) for x in pts])
        coeffs = np.array([float(a) for a in coeffs])
    else:
        coeffs = _hankel_float(measure, k, tol)
        values = np.polynomial.polynomial.polyval(pts, coeffs)
    return ResidualPolynomial(degree=k, coefficients=coeffs, values_on_spectrum=values,
                              spectrum=pts.copy())


# --- route 3: Vandermonde subset sums ------------------------------------


def _subsets(r, k):
    return itertools.combinations(range(r - 1, -1, -1), k)


def _log_pair_table(lam, tie_rtol):
    diff = np.abs(lam[:, None] - lam[None, :])
    scale = np.maximum(np.abs(lam[:, None]), np.abs(lam[None, :]))
    with np.errstate(divide="ignore"):
        table = np.log(diff)
    table[diff <= tie_rtol * scale] = -np.inf
    return table


def _subset_sums(lam, p_vec, k, points, cap, tie_rtol=TIE_RTOL, with_weights=True):
    """Weighted averages ``sum_S w_S prod_{j in S}(1 - x / lambda_j)``.

    Weights are accumulated in log space so that squared Vandermonde
    factors neither overflow nor underflow.
    """
    lam = np.asarray(lam, dtype=float)
    p_vec = np.asarray(p_vec, dtype=float)
    r = lam.shape[0]
    if not 1 <= k <= r:
        raise ValidationError(f"k={k} needs 1 <= k <= r={r}")
    count = math.comb(r, k)
    if count > cap:
        raise CombinatorialCapError(count, cap)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    pair = _log_pair_table(lam, tie_rtol)
    with np.errstate(divide="ignore"):
        single = 2.0 * np.log(np.abs(p_vec)) + 2.0 * np.log(lam)
    factors = 1.0 - points[None, :] / lam[:, None]  # r x npts
    iu = np.triu_indices(k, 1)
    it = _subsets(r, k)
    log_d = np.empty(count) if with_weights else None
    subsets = np.empty((count, k), dtype=np.int64) if with_weights else None
    run_max = -np.inf
    num = np.zeros(points.shape[0])
    den = 0.0
    start = 0
    while True:
        chunk = list(itertools.islice(it, _CHUNK))
        if not chunk:
            break
        C = np.array(chunk, dtype=np.int64)
        ld = single[C].sum(axis=1)
        if k > 1:
            ld = ld + 2.0 * pair[C[:, iu[0]], C[:, iu[1]]].sum(axis=1)
        if with_weights:
            log_d[start:start + len(C)] = ld
            subsets[start:start + len(C)] = C
        start += len(C)
        cmax = ld.max()
        if cmax == -np.inf:
            continue
        if cmax > run_max:
            shrink = 0.0 if run_max == -np.inf else math.exp(run_max - cmax)
            num *= shrink
            den *= shrink
            run_max = cmax
        e = np.exp(ld - run_max)
        den += e.sum()
        num += e @ np.prod(factors[C], axis=1)
    if den == 0.0:
        values = np.zeros(points.shape[0])
        weights = np.zeros(count) if with_weights else None
    else:
        values = num / den
        weights = np.exp(log_d - run_max) / den if with_weights else None
    sw = SubsetWeights(index_subsets=subsets, weights=weights) if with_weights else None
    return sw, values


def residual_values_vandermonde(decomp: SpectralDecomposition, p_vec, k: int,
                                cap: int = DEFAULT_CAP, points=None):
    """Subset weights and ``Q_k`` values from the squared-Vandermonde formula.

    Each subset ``S`` of ``k`` eigenvalues gets weight proportional to
    ``prod p_j^2 lambda_j^2 * V(lambda_S)^2``; ``Q_k(x)`` is the weighted
    average of ``prod_{j in S} (1 - x / lambda_j)``. When every weight
    vanishes (fewer than ``k`` distinct relevant eigenvalues) the values are
    exactly zero.

    Returns ``(SubsetWeights, values)`` with values at the eigenvalues
    unless ``points`` is given.
    """
    lam = decomp.eigenvalues
    p_vec = np.asarray(p_vec, dtype=float)
    if p_vec.shape != lam.shape:
        raise DimensionMismatchError(f"p_vec has shape {p_vec.shape}, expected {lam.shape}")
    pts = lam if points is None else points
    return _subset_sums(lam, p_vec, k, pts, cap)


def noise_free_poly(decomp: SpectralDecomposition, p_clean, k: int, cap: int = DEFAULT_CAP):
    """Noise-free residual polynomial ``Q*_k`` built from ``p = U^T X beta*``.

    Values come from the subset formula; coefficients from the moment route
    on the noise-free measure (rational arithmetic when the floating-point
    Hankel system is ill-conditioned).
    """
    weights, values = residual_values_vandermonde(decomp, p_clean, k, cap)
    measure = build_measure(decomp, p_clean)
    coeffs = None
    if k <= int(np.sum(measure.masses > 0)):
        try:
            coeffs = residual_poly_moments(measure, k).coefficients
        except IllConditionedMomentsError:
            coeffs = residual_poly_moments(measure, k, exact=True).coefficients
    poly = ResidualPolynomial(degree=k, coefficients=coeffs, values_on_spectrum=values,
                              spectrum=decomp.eigenvalues.copy())
    return weights, poly


# --- checks ----------------------------------------------------------------


def orthogonality_defect(polys: Sequence[ResidualPolynomial], measure: DiscreteMeasure) -> np.ndarray:
    """Normalized inner products ``|<Q_k, Q_l>| / (||Q_k|| ||Q_l||)`` under ``measure``.

    Diagonal entries are 0 by convention.
    """
    vals = [poly.values_at(measure.support) for poly in polys]
    m = len(vals)
    out = np.zeros((m, m))
    norms = [math.sqrt(measure.inner(v, v)) for v in vals]
    for a in range(m):
        for b in range(a + 1, m):
            d = abs(measure.inner(vals[a], vals[b])) / (norms[a] * norms[b])
            out[a, b] = out[b, a] = d
    return out


def orthogonality_defect_exact(coeff_lists, support, masses) -> list:
    """Exact rational inner products ``<Q_k, Q_l>`` for ``k != l``."""
    sup = [Fraction(x) for x in support]
    mas = [Fraction(w) for w in masses]
    vals = [[_horner_exact(c, x) for x in sup] for c in coeff_lists]
    out = []
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            out.append(sum(w * fa * fb for w, fa, fb in zip(mas, vals[a], vals[b])))
    return out


def _first_order_bound(lam, k, x, cap):
    r = lam.shape[0]
    count = math.comb(r, k)
    if count > cap:
        raise CombinatorialCapError(count, cap)
    a = np.abs(1.0 - x / lam)
    b = 1.0 / lam
    best = 0.0
    it = _subsets(r, k)
    while True:
        chunk = list(itertools.islice(it, _CHUNK))
        if not chunk:
            break
        C = np.array(chunk, dtype=np.int64)
        A, B = a[C], b[C]
        ones = np.ones((len(C), 1))
        left = np.cumprod(np.hstack([ones, A[:, :-1]]), axis=1)
        right = np.cumprod(np.hstack([ones, A[:, :0:-1]]), axis=1)[:, ::-1]
        best = max(best, float(np.max(np.sum(B * left * right, axis=1))))
    return best


def perturbation_gap(decomp: SpectralDecomposition, p_vec, k: int, i: int, delta: float,
                     cap: int = DEFAULT_CAP):
    """Change of ``Q_k`` when moving from ``lambda_i`` to ``lambda_i + delta``.

    Returns ``(gap, bound)`` where ``bound`` is the first-order estimate
    ``delta * max_S sum_l (1/lambda_{j_l}) prod_{m != l} |1 - lambda_i/lambda_{j_m}|``.
    """
    lam = decomp.eigenvalues
    x = lam[i]
    if x + delta <= 0:
        raise ValidationError("lambda_i + delta must stay positive")
    _, vals = _subset_sums(lam, p_vec, k, [x, x + delta], cap, with_weights=False)
    gap = float(abs(vals[0] - vals[1]))
    return gap, abs(delta) * _first_order_bound(lam, k, x, cap)


def value_envelope(decomp, k: int, i: int, p_vec=None, tie_rtol: float = TIE_RTOL) -> float:
    """``max_S prod_{j in S} |1 - lambda_i / lambda_j|`` over positive-weight ``k``-subsets.

    A subset has positive weight when its eigenvalues are pairwise distinct
    (and, if ``p_vec`` is given, all relevant). The factors are nonnegative,
    so the maximum is the product of the ``k`` largest factors taken one per
    distinct eigenvalue; no enumeration is needed. Returns 0 when no such
    subset exists.
    """
    lam = decomp.eigenvalues if isinstance(decomp, SpectralDecomposition) else np.asarray(decomp, dtype=float)
    if not 1 <= k <= lam.shape[0]:
        raise ValidationError(f"k={k} needs 1 <= k <= r={lam.shape[0]}")
    groups = tie_groups(lam, tie_rtol)
    if p_vec is not None:
        p_vec = np.asarray(p_vec, dtype=float)
        groups = [g for g in groups if np.any(p_vec[g] != 0)]
    if len(groups) < k:
        return 0.0
    reps = np.array([lam[g[0]] for g in groups])
    a = np.sort(np.abs(1.0 - lam[i] / reps))[::-1]
    return float(np.prod(a[:k]))
