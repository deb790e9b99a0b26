import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from plskrylov.errors import DimensionMismatchError, NumericalError, ValidationError, ZeroSeedError
from plskrylov.pls_core import filter_factors, krylov_basis, ols_fit, pls_fit, pls_fit_nipals
from plskrylov.spectral import decompose, project

from helpers import diag_design, rotated_design


def test_scalar_gram_has_grade_one(rng):
    X = 3.0 * np.linalg.qr(rng.standard_normal((5, 5)))[0]
    kb = krylov_basis(X, rng.standard_normal(5), 4)
    assert kb.k == 1 and kb.grade_reached


@pytest.mark.parametrize("m", [1, 2, 4])
def test_grade_equals_relevant_count(rng, m):
    lam = np.array([9.0, 7.0, 5.0, 3.0, 2.0, 1.0])
    X, U, _ = rotated_design(lam, rng)
    coords = np.zeros(6)
    coords[rng.choice(6, m, replace=False)] = rng.uniform(0.5, 1.5, m)
    kb = krylov_basis(X, U @ coords, 6)
    assert kb.k == m and kb.grade_reached


def test_krylov_span_matches_power_basis(rng):
    X = np.eye(8) + 0.3 * rng.standard_normal((8, 8))
    Y = rng.standard_normal(8)
    A, b = X.T @ X, X.T @ Y
    for k in range(1, 6):
        P = np.column_stack([np.linalg.matrix_power(A, j) @ b for j in range(k)])
        kb = krylov_basis(X, Y, k)
        assert kb.k == k
        np.testing.assert_allclose(kb.basis_vectors.T @ kb.basis_vectors, np.eye(k), atol=1e-12)
        assert np.max(subspace_angles(P, kb.basis_vectors)) < 1e-7


def test_krylov_accepts_decomposition(rng):
    X = rng.standard_normal((7, 5))
    Y = rng.standard_normal(7)
    a = krylov_basis(X, Y, 4).basis_vectors
    b = krylov_basis(decompose(X), Y, 4).basis_vectors
    assert np.max(subspace_angles(a, b)) < 1e-10


def test_zero_seed():
    X = diag_design([4.0, 1.0], n=3)
    with pytest.raises(ZeroSeedError, match="zero seed"):
        krylov_basis(X, np.array([0.0, 0.0, 1.0]), 2)
    with pytest.raises(ZeroSeedError):
        pls_fit(X, np.array([0.0, 0.0, 1.0]), 2)


def test_krylov_argument_checks(rng):
    with pytest.raises(ValidationError):
        krylov_basis(np.eye(3), np.ones(3), 0)
    with pytest.raises(ValidationError):
        krylov_basis(np.eye(3), np.ones(3), 2, grade_tol=0.0)


def test_three_point_oracle():
    X = diag_design([4.0, 2.0, 1.0])
    path = pls_fit(X, np.ones(3), 3)
    assert path.residual_norms[0] ** 2 == pytest.approx(2.0 / 3.0, rel=1e-12)
    np.testing.assert_allclose(1 - path.filter_factors[0], [-1 / 3, 1 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(path.betas[0], np.sqrt([4, 2, 1]) / 3.0, atol=1e-12)


def test_terminal_step_interpolates(rng):
    lam = np.geomspace(10, 1, 7)
    X, U, _ = rotated_design(lam, rng)
    Y = U @ rng.uniform(0.5, 1.5, 7)
    path = pls_fit(X, Y, 10)
    assert path.k_max == 7 and path.truncated
    assert path.residual_norms[-1] <= 1e-8 * np.linalg.norm(Y)


def test_scalar_gram_fits_at_step_one(rng):
    X = 2.0 * np.linalg.qr(rng.standard_normal((4, 4)))[0]
    Y = rng.standard_normal(4)
    path = pls_fit(X, Y, 3)
    assert path.k_max == 1
    assert path.residual_norms[0] <= 1e-12 * np.linalg.norm(Y)


def test_fit_shapes_and_checks(rng):
    X = rng.standard_normal((9, 4))
    path = pls_fit(X, rng.standard_normal(9), 3)
    assert path.betas.shape == (3, 4) and path.fitted.shape == (3, 9)
    assert path.filter_factors.shape == (3, 4)
    np.testing.assert_allclose(path.residual(2), path.response - X @ path.betas[1], atol=1e-12)
    with pytest.raises(DimensionMismatchError):
        pls_fit(X, np.ones(8), 2)
    with pytest.raises(ValidationError):
        pls_fit(X, np.ones(9), 0)


def test_nipals_matches_krylov(rng):
    X = rng.standard_normal((10, 6))
    Y = rng.standard_normal(10)
    a = pls_fit(X, Y, 6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        b = pls_fit_nipals(X, Y, 6)
    assert b.method == "nipals" and not b.orthogonality_warning
    for k in range(6):
        assert np.linalg.norm(b.betas[k] - a.betas[k]) <= 1e-6 * np.linalg.norm(a.betas[k])
        assert np.linalg.norm(b.fitted[k] - a.fitted[k]) <= 1e-6 * np.linalg.norm(a.fitted[k])


def test_nipals_scores_orthogonal(rng):
    X = rng.standard_normal((12, 5))
    path = pls_fit_nipals(X, rng.standard_normal(12), 5)
    T = path.scores
    G = T.T @ T
    norms = np.sqrt(np.diag(G))
    off = np.abs(G - np.diag(np.diag(G))) / np.outer(norms, norms)
    assert off.max() <= 1e-8


def test_nipals_weights_unit_norm(rng):
    X = rng.standard_normal((12, 5))
    path = pls_fit_nipals(X, rng.standard_normal(12), 4)
    np.testing.assert_allclose(np.linalg.norm(path.weights, axis=0), 1.0, atol=1e-12)
    # w_1 is the normalized covariance direction
    w1 = X.T @ path.response
    np.testing.assert_allclose(path.weights[:, 0], w1 / np.linalg.norm(w1), atol=1e-12)


def test_nipals_stops_at_grade(rng):
    lam = np.array([5.0, 5.0, 2.0, 2.0])
    X, U, _ = rotated_design(lam, rng)
    path = pls_fit_nipals(X, U @ np.ones(4), 4)
    assert path.k_max == 2 and path.truncated


def test_ols_identity(rng):
    Y = rng.standard_normal(4)
    np.testing.assert_allclose(ols_fit(np.eye(4), Y).beta_ols, Y, atol=1e-14)


def test_ols_orthogonal_columns(rng):
    Q = np.linalg.qr(rng.standard_normal((6, 3)))[0] * [3.0, 1.5, 0.2]
    Y = rng.standard_normal(6)
    expected = (Q.T @ Y) / np.sum(Q**2, axis=0)
    np.testing.assert_allclose(ols_fit(Q, Y).beta_ols, expected, atol=1e-12)


def test_ols_equals_terminal_pls(rng):
    X, U, _ = rotated_design(np.geomspace(8, 1, 6), rng, n=9, p=6)
    Y = X @ rng.standard_normal(6) + rng.standard_normal(9)
    path = pls_fit(X, Y, 6)
    np.testing.assert_allclose(path.betas[-1], ols_fit(X, Y).beta_ols, atol=1e-7)


def test_filter_factor_single_eigenvalue(rng):
    X = 1.7 * np.linalg.qr(rng.standard_normal((4, 4)))[0]
    Y = rng.standard_normal(4)
    d = decompose(X)
    path = pls_fit(X, Y, 1, decomp=d)
    np.testing.assert_allclose(filter_factors(path, project(d, Y), d), 1.0, atol=1e-12)


def test_filter_factor_signs(rng):
    lam = np.array([12.0, 7.0, 4.0, 2.5, 1.0])
    X, U, _ = rotated_design(lam, rng)
    Y = U @ rng.uniform(0.5, 1.5, 5)
    d = decompose(X)
    path = pls_fit(X, Y, 4, decomp=d)
    f = filter_factors(path, project(d, Y), d)
    for k in range(1, 5):
        assert (f[k - 1, 0] > 1) if k % 2 else (f[k - 1, 0] < 1)
        assert 0 < f[k - 1, -1] < 1


def test_filter_factor_undefined_direction():
    X = diag_design([4.0, 2.0, 1.0])
    Y = np.array([1.0, 0.0, 1.0])
    d = decompose(X)
    f = filter_factors(pls_fit(X, Y, 2, decomp=d), project(d, Y), d)
    assert np.all(np.isnan(f[:, 1])) and np.all(np.isfinite(f[:, [0, 2]]))


def test_filter_factor_reconstruction_failure_detected(rng):
    X = rng.standard_normal((6, 4))
    Y = rng.standard_normal(6)
    d = decompose(X)
    path = pls_fit(X, Y, 3, decomp=d)
    bad = path.__class__(**{**path.__dict__, "betas": path.betas * 1.01})
    with pytest.raises(NumericalError):
        filter_factors(bad, project(d, Y), d)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(2, 10))
def test_path_properties(seed, n, p):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, p))
    Y = r.standard_normal(n)
    path = pls_fit(X, Y, min(n, p))
    scale = np.linalg.norm(Y)
    # nested subspaces: residual norms nonincreasing
    assert np.all(np.diff(path.residual_norms) <= 1e-10 * scale)
    # residual orthogonal to X K^k
    for k in range(1, path.k_max + 1):
        B = X @ krylov_basis(X, Y, k).basis_vectors
        assert np.linalg.norm(B.T @ path.residual(k)) <= 1e-7 * np.linalg.norm(B) * scale
