"""Numerical primitive tests: SVD, PCA, LSQR, and the normalizers."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from nui.linalg import (
    l2_normalize_columns,
    l2_normalize_rows,
    lsqr,
    pca,
    preprocess_embedding,
    randomized_svd,
    standardize_columns,
)


class TestRandomizedSvd:
    def test_identity_singular_values(self):
        res = randomized_svd(np.eye(3), 2, seed=0)
        np.testing.assert_allclose(res.singular_values, [1.0, 1.0], atol=1e-12)

    def test_rank_one_left_vector(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(6)
        b = rng.standard_normal(4)
        res = randomized_svd(np.outer(a, b), 1, seed=0)
        expected = a / np.linalg.norm(a)
        expected *= np.sign(expected[np.argmax(np.abs(expected))])
        np.testing.assert_allclose(res.left[:, 0], expected, atol=1e-10)

    def test_sparse_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        dense = rng.standard_normal((50, 20)) * (rng.random((50, 20)) < 0.3)
        res = randomized_svd(sp.csr_matrix(dense), 10, seed=1)
        s_oracle = np.linalg.svd(dense, compute_uv=False)[:10]
        np.testing.assert_allclose(
            res.singular_values, s_oracle, rtol=1e-6
        )

    def test_columns_orthonormal(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((40, 30))
        res = randomized_svd(m, 8, seed=2)
        gram = res.left.T @ res.left
        np.testing.assert_allclose(gram, np.eye(8), atol=1e-8)

    def test_singular_values_non_increasing(self):
        rng = np.random.default_rng(13)
        res = randomized_svd(rng.standard_normal((30, 25)), 12, seed=0)
        assert (np.diff(res.singular_values) <= 1e-12).all()

    def test_rank_deficient_pads_with_zeros(self):
        a = np.outer(np.arange(1.0, 7.0), np.ones(5))  # rank 1
        res = randomized_svd(a, 3, seed=0)
        assert res.effective_rank == 1
        assert res.rank_deficient
        np.testing.assert_allclose(res.left[:, 1:], 0.0, atol=1e-12)

    def test_d_too_large_rejected(self):
        with pytest.raises(ValueError):
            randomized_svd(np.eye(3), 4, seed=0)


class TestPca:
    def test_dominant_axis_found(self):
        x = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        res = pca(x, 1)
        assert abs(res.loadings[0, 0]) > 0.999
        assert abs(res.loadings[1, 0]) < 1e-3

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((30, 6)) * 3.0 + rng.standard_normal(6)
        res = pca(x, 6)
        recon = res.scores @ res.loadings.T + res.mean
        np.testing.assert_allclose(recon, x, atol=1e-8)

    def test_explained_variance_matches_eigh_oracle(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((100, 10)) @ np.diag(np.linspace(3, 0.5, 10))
        res = pca(x, 3)
        cov = np.cov(x, rowvar=False)
        eigs = np.sort(np.linalg.eigvalsh(cov))[::-1][:3]
        np.testing.assert_allclose(res.explained_variance, eigs, atol=1e-8)

    def test_constant_column_contributes_zero(self):
        rng = np.random.default_rng(2)
        x = np.column_stack([rng.standard_normal(20), np.full(20, 7.0)])
        res = pca(x, 2)
        assert res.explained_variance[1] < 1e-20

    def test_score_columns_orthogonal(self):
        rng = np.random.default_rng(23)
        res = pca(rng.standard_normal((50, 8)), 4)
        gram = res.scores.T @ res.scores
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() < 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2000, 50))
        r1 = pca(x, 5, seed=9)
        r2 = pca(x, 5, seed=9)
        np.testing.assert_array_equal(r1.scores, r2.scores)


def _dense_ops(a):
    return (lambda v: a @ v), (lambda u: a.T @ u)


class TestLsqr:
    def test_identity_system(self):
        b = np.array([1.0, -2.0, 3.0])
        apply_a, apply_at = _dense_ops(np.eye(3))
        res = lsqr(apply_a, apply_at, b)
        np.testing.assert_allclose(res.x, b, atol=1e-10)
        assert res.converged

    def test_overdetermined_consistent(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((40, 10))
        x_true = rng.standard_normal(10)
        apply_a, apply_at = _dense_ops(a)
        res = lsqr(apply_a, apply_at, a @ x_true, max_iter=200)
        np.testing.assert_allclose(res.x, x_true, atol=1e-7)

    def test_matches_dense_solver_oracle(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((200, 20))
        b = rng.standard_normal(200)
        apply_a, apply_at = _dense_ops(a)
        res = lsqr(apply_a, apply_at, b, max_iter=300)
        oracle, *_ = np.linalg.lstsq(a, b, rcond=None)
        np.testing.assert_allclose(res.x, oracle, atol=1e-8)

    def test_damped_matches_ridge_oracle(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((60, 15))
        b = rng.standard_normal(60)
        damp = 0.3
        apply_a, apply_at = _dense_ops(a)
        res = lsqr(apply_a, apply_at, b, damp=damp, max_iter=300, tol=1e-12)
        oracle = np.linalg.solve(a.T @ a + damp**2 * np.eye(15), a.T @ b)
        np.testing.assert_allclose(res.x, oracle, atol=1e-8)

    def test_residuals_monotone(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((50, 12))
        b = rng.standard_normal(50)
        apply_a, apply_at = _dense_ops(a)
        res = lsqr(apply_a, apply_at, b, damp=0.1, max_iter=50, tol=0.0)
        diffs = np.diff(res.residual_norms)
        assert (diffs <= 1e-10).all()

    def test_warm_start_agrees_with_cold(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((80, 10))
        b = rng.standard_normal(80)
        apply_a, apply_at = _dense_ops(a)
        tol = 1e-10
        cold = lsqr(apply_a, apply_at, b, damp=0.05, max_iter=400, tol=tol)
        warm = lsqr(apply_a, apply_at, b, x0=rng.standard_normal(10),
                    damp=0.05, max_iter=400, tol=tol)
        assert np.abs(cold.x - warm.x).max() < 10 * 1e-8

    def test_warm_start_at_solution_converges_fast(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((50, 8))
        b = rng.standard_normal(50)
        apply_a, apply_at = _dense_ops(a)
        exact, *_ = np.linalg.lstsq(a, b, rcond=None)
        res = lsqr(apply_a, apply_at, b, x0=exact, max_iter=50)
        assert res.iterations <= 2


class TestNormalizers:
    def test_column_345(self):
        out = l2_normalize_columns(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(out[:, 0], [0.6, 0.8])

    def test_zero_column_unchanged(self):
        out = l2_normalize_columns(np.zeros((4, 2)))
        np.testing.assert_array_equal(out, np.zeros((4, 2)))

    def test_unit_column_unchanged(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(l2_normalize_columns(x), x)

    def test_preprocess_constant_matrix_is_zero(self):
        out = preprocess_embedding(np.full((5, 3), 2.5))
        np.testing.assert_array_equal(out, np.zeros((5, 3)))

    def test_preprocess_hand_example(self):
        out = preprocess_embedding(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        r = 1.0 / np.sqrt(2.0)
        expected = np.array([[-r, -r], [0.0, 0.0], [r, r]])
        np.testing.assert_allclose(out, expected, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_preprocess_rows_unit_norm(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((12, 5)) * rng.uniform(0.1, 10, 5)
        out = preprocess_embedding(z)
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        np.testing.assert_allclose(norms[nonzero], 1.0, atol=1e-12)

    def test_standardize_zero_variance_column(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        out = standardize_columns(x)
        np.testing.assert_array_equal(out[:, 1], 0.0)
        assert abs(out[:, 0].mean()) < 1e-12
        np.testing.assert_allclose(out[:, 0].std(), 1.0)
