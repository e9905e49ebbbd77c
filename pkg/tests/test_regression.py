import numpy as np
import pytest
from scipy import linalg

from hclda.errors import DegenerateEigenvalue, InvalidInput, SingularMatrix
from hclda.lda import LabeledDataset, class_statistics, fit_lda
from hclda.regression import (
    augment,
    build_responses,
    eigenvalue_from_fit,
    hat_bundle,
    penalty,
    ridge_solve,
)
from tests.conftest import random_dataset

DELTA = 1e-5


def fitted(data, D, delta=DELTA):
    s = class_statistics(data, delta)
    m = fit_lda(s, D)
    r = build_responses(s, m, data.y)
    b = hat_bundle(data, delta)
    return s, m, r, b, ridge_solve(b, r)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestResponses:
    def test_antisymmetric_two_class(self):
        X = np.array([[-3.0, 0.1], [-2.0, -0.1], [2.0, 0.2], [3.0, -0.2]])
        s = class_statistics(LabeledDataset(X, np.array([1, 1, 2, 2])), 1e-3)
        r = build_responses(s, fit_lda(s, 1), [1, 1, 2, 2])
        assert r.xi[0, 0] == pytest.approx(-r.xi[1, 0])

    def test_weighted_sum_zero(self, rng):
        data = random_dataset(rng, 80, 5, 6)
        s = class_statistics(data, 0.1)
        r = build_responses(s, fit_lda(s, 4), data.y)
        np.testing.assert_allclose(s.counts @ r.xi, 0.0, atol=1e-12 * np.abs(r.xi).max())

    def test_constant_within_class(self, rng):
        data = random_dataset(rng, 40, 3, 4)
        s = class_statistics(data, 0.1)
        r = build_responses(s, fit_lda(s, 2), data.y)
        for j in range(1, 5):
            block = r.Y[data.y == j]
            assert np.all(block == block[0])

    def test_pairwise_form_agrees(self, model2_600):
        # xi_j = (1/(n lambda)) sum_k n_k (xbar_j - xbar_k)^T t
        s, m, r, _, _ = fitted(model2_600, 3)
        proj = s.means @ m.T
        alt = np.einsum("k,jkd->jd", s.counts, proj[:, None, :] - proj[None, :, :]) / (s.n * m.lambdas)
        np.testing.assert_allclose(alt, r.xi, rtol=1e-10, atol=1e-12)

    def test_cross_product_identity_model2(self, model2_600):
        s, m, r, _, _ = fitted(model2_600, 4)
        lhs = model2_600.X.T @ r.Y
        rhs = s.n * linalg.sqrtm(s.S_Wd).real @ m.eigvecs
        assert rel(lhs, rhs) < 1e-8

    def test_degenerate_eigenvalue(self):
        X = np.array([[-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])
        data = LabeledDataset(X, np.array([1, 1, 2, 2]))
        s = class_statistics(data, 1e-3)
        with pytest.raises(DegenerateEigenvalue):
            build_responses(s, fit_lda(s, 1), data.y)


class TestHatBundle:
    def test_saturated_design_is_identity(self, rng):
        X = rng.normal(size=(4, 3))
        b = hat_bundle(X, 0.0)
        np.testing.assert_allclose(b.H, np.eye(4), atol=1e-10)

    def test_heavy_ridge_tends_to_mean(self, rng):
        X = rng.normal(size=(12, 3))
        b = hat_bundle(X, 1e12)
        np.testing.assert_allclose(b.H, np.full((12, 12), 1 / 12), atol=1e-9)

    def test_leverages(self, model2_600):
        b = hat_bundle(model2_600, DELTA)
        h = b.leverages
        assert np.all(h >= 0) and np.all(h < 1)
        np.testing.assert_allclose(h, np.diag(b.H), atol=1e-13)
        assert np.trace(b.H) <= b.p + 1 + 1e-9
        np.testing.assert_array_equal(b.H, b.H.T)

    def test_matches_direct_formula(self, rng):
        X = rng.normal(size=(15, 4))
        Xt = augment(X)
        ref = Xt @ np.linalg.inv(Xt.T @ Xt + penalty(4, 0.3)) @ Xt.T
        np.testing.assert_allclose(hat_bundle(X, 0.3).H, ref, atol=1e-12)

    def test_singular_without_ridge(self, rng):
        with pytest.raises(SingularMatrix):
            hat_bundle(rng.normal(size=(5, 8)), 0.0)

    def test_intercept_not_penalized(self):
        np.testing.assert_array_equal(np.diag(penalty(3, 2.0)), [0, 2, 2, 2])


class TestRidgeSolve:
    def test_zero_response(self, rng):
        b = hat_bundle(rng.normal(size=(10, 3)), 0.1)
        sol = ridge_solve(b, np.zeros(10))
        np.testing.assert_array_equal(sol.alpha, 0.0)

    def test_shape_mismatch(self, rng):
        b = hat_bundle(rng.normal(size=(10, 3)), 0.1)
        with pytest.raises(InvalidInput):
            ridge_solve(b, np.zeros(9))

    def test_fitted_is_hat_times_y(self, model2_600):
        _, _, r, b, sol = fitted(model2_600, 2)
        np.testing.assert_allclose(sol.fitted, b.H @ r.Y, atol=1e-10)

    def test_normal_equation_intercept(self, model2_600):
        s, _, _, _, sol = fitted(model2_600, 4)
        lhs = s.n * sol.intercept + (s.counts @ s.means) @ sol.beta
        np.testing.assert_allclose(lhs, 0.0, atol=1e-10)

    def test_coefficients_parallel_to_directions(self, model2_600):
        _, m, _, _, sol = fitted(model2_600, 4)
        target = m.T / (1 + m.lambdas)
        for d in range(4):
            assert rel(sol.beta[:, d], target[:, d]) < 1e-8

    def test_projection_identity(self, model2_600, rng):
        s, m, _, _, sol = fitted(model2_600, 4)
        x = rng.normal(scale=5.0, size=(100, 20))
        lhs = augment(x) @ sol.alpha
        rhs = (x - s.grand_mean) @ m.T / (1 + m.lambdas)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10 * np.abs(rhs).max())
        # (I + Lambda) A xt == T^T x - T^T xbar
        np.testing.assert_allclose(lhs * (1 + m.lambdas), (x - s.grand_mean) @ m.T, rtol=1e-8,
                                   atol=1e-9 * np.abs(rhs).max())


class TestEigenvalueFromFit:
    @pytest.mark.parametrize("delta", [1e-5, 1e-2, 1.0])
    def test_eigenvalue_recovered(self, rng, delta):
        data = random_dataset(rng, 90, 6, 5)
        _, m, _, _, sol = fitted(data, 4, delta)
        np.testing.assert_allclose(eigenvalue_from_fit(sol.fitted, sol.beta, delta), m.lambdas, rtol=1e-8)

    def test_unscaled_penalty_is_off_by_n(self, model2_600):
        # With delta|beta|^2 in place of (delta/n)|beta|^2 the identity fails by
        # exactly delta (1 - 1/n) |beta|^2.
        s, m, _, _, sol = fitted(model2_600, 3)
        n = s.n
        bb = np.sum(sol.beta**2, axis=0)
        unscaled = np.mean(sol.fitted**2, axis=0) + DELTA * bb
        np.testing.assert_allclose(unscaled - 1 / (1 + m.lambdas), DELTA * (1 - 1 / n) * bb, rtol=1e-6)
        assert np.max(np.abs(unscaled * (1 + m.lambdas) - 1)) > 1e-8
