import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxembed.mf import (FactorizationResult, factorize, frobenius_residual, jacobi_svd,
                         optimal_residual, randomized_svd, residual_check)


def test_identity_factorization():
    r = factorize(np.eye(2), 2)
    assert r.residual == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(r.singular_values, [1.0, 1.0], atol=1e-12)


def test_rank_one_factorization():
    c = np.full((2, 2), 2.0)
    r = factorize(c, 1)
    assert r.singular_values[0] == pytest.approx(4.0, abs=1e-12)
    assert np.linalg.norm(r.phi @ r.theta.T - c) < 1e-10
    assert r.residual < 1e-10


def test_sparse_input_and_halves():
    c = sp.random(40, 40, density=0.2, random_state=1, format="csr")
    r = factorize(c, 5)
    np.testing.assert_allclose(r.phi, r.u * np.sqrt(r.singular_values))
    np.testing.assert_allclose(r.theta, r.v * np.sqrt(r.singular_values))
    assert r.embedding().theta is r.theta


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_residual_monotone_in_rank(seed):
    c = np.random.default_rng(seed).normal(size=(50, 50))
    residuals = [factorize(c, d).residual for d in range(1, 12)]
    assert all(b <= a + 1e-9 for a, b in zip(residuals, residuals[1:]))


def test_rank_deficient_request_pads_and_warns():
    c = np.outer([1.0, 2.0, 3.0], [1.0, -1.0, 0.5])
    with pytest.warns(RuntimeWarning, match="numerical rank 1"):
        r = factorize(c, 3)
    assert np.all(r.phi[:, 1:] == 0.0) and np.all(r.theta[:, 1:] == 0.0)
    assert r.residual < 1e-10


def test_factorize_validation():
    with pytest.raises(ValueError):
        factorize(np.eye(3), 4)
    with pytest.raises(ValueError):
        factorize(np.array([[1.0, np.inf], [0.0, 1.0]]), 1)


def test_residual_check_examples():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(6, 3)), rng.normal(size=(5, 3))
    c = a @ b.T
    exact = FactorizationResult(a, b, np.ones(3), 0.0, a, b)
    assert residual_check(c, exact) < 1e-10
    zero = FactorizationResult(np.zeros((6, 3)), np.zeros((5, 3)), np.zeros(3), 0.0, a, b)
    assert residual_check(c, zero) == pytest.approx(np.linalg.norm(c))
    with pytest.raises(ValueError):
        residual_check(c.T, exact)


def test_residual_matches_dense_oracle():
    c = np.random.default_rng(5).normal(size=(20, 20))
    r = factorize(c, 5)
    best = optimal_residual(c, 5)
    assert residual_check(c, r) == pytest.approx(best, rel=0.01)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 120), st.integers(1, 15))
def test_near_optimal_and_orthonormal(seed, n, d):
    rng = np.random.default_rng(seed)
    # decaying spectrum, as in proximity matrices
    u, _ = np.linalg.qr(rng.normal(size=(n, n)))
    v, _ = np.linalg.qr(rng.normal(size=(n, n)))
    c = (u * 0.8 ** np.arange(n)) @ v.T
    r = factorize(c, d, seed=seed)
    assert r.residual <= 1.01 * optimal_residual(c, d) + 1e-12
    assert r.residual == pytest.approx(residual_check(c, r), abs=1e-8)
    np.testing.assert_allclose(r.u.T @ r.u, np.eye(d), atol=1e-8)
    np.testing.assert_allclose(r.v.T @ r.v, np.eye(d), atol=1e-8)
    assert np.all(np.diff(r.singular_values) <= 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 25), st.integers(1, 25))
def test_jacobi_svd_matches_lapack(seed, m, n):
    a = np.random.default_rng(seed).normal(size=(m, n))
    u, s, v = jacobi_svd(a)
    np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), atol=1e-10)
    np.testing.assert_allclose((u * s) @ v.T, a, atol=1e-10)


def test_frobenius_residual_blocks():
    rng = np.random.default_rng(3)
    c = rng.normal(size=(33, 7))
    phi, theta = rng.normal(size=(33, 2)), rng.normal(size=(7, 2))
    expected = np.linalg.norm(c - phi @ theta.T)
    assert frobenius_residual(c, phi, theta, block=4) == pytest.approx(expected)
    assert frobenius_residual(sp.csr_matrix(c), phi, theta, block=5) == pytest.approx(expected)


def test_randomized_svd_deterministic():
    c = np.random.default_rng(1).normal(size=(30, 30))
    a = randomized_svd(c, 4, seed=7)
    b = randomized_svd(c, 4, seed=7)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
