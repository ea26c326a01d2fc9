import numpy as np
import pytest

from migselect.lasso import (lambda_grid, lasso_cv, lasso_fit, make_folds,
                             soft_threshold)
from migselect.ols import fit_ols


def kkt_violation(X, y, fit):
    """Largest violation of the stationarity conditions on the
    standardized scale; 0 means the KKT conditions hold exactly."""
    n = len(y)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    Xs = (X - mean) / scale
    r = (y - y.mean()) - Xs @ fit.slopes_std
    grad = Xs.T @ r / n
    worst = 0.0
    for j, b in enumerate(fit.slopes_std):
        if b == 0.0:
            worst = max(worst, abs(grad[j]) - fit.lam)
        else:
            worst = max(worst, abs(grad[j] - fit.lam * np.sign(b)))
    return worst


class TestSoftThreshold:
    def test_shrinks_toward_zero(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.5, 1.0) == 0.0


class TestLassoFit:
    def test_lambda_zero_matches_ols(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 4))
        y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.standard_normal(50)
        fit = lasso_fit(X, y, 0.0)
        ols = fit_ols(X, y)
        np.testing.assert_allclose(fit.slopes, ols.coef[1:], atol=1e-6)
        assert fit.intercept == pytest.approx(ols.coef[0], abs=1e-6)

    def test_lambda_max_zeroes_everything(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((40, 5))
        y = X[:, 0] + rng.standard_normal(40)
        lam_max = lambda_grid(X, y)[0]
        for lam in (lam_max, 2 * lam_max):
            fit = lasso_fit(X, y, lam)
            assert np.all(fit.slopes == 0.0)

    def test_orthogonal_design_soft_threshold(self):
        # two orthogonal +-1 columns: slope_j = soft_threshold(x_j'y/n, lam)
        X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
        y = np.array([2.0, 1.0, -0.5, -2.5])
        n = 4
        lam = 0.4
        fit = lasso_fit(X, y, lam)
        expected = [soft_threshold(float(X[:, j] @ (y - y.mean())) / n, lam)
                    for j in range(2)]
        np.testing.assert_allclose(fit.slopes, expected, atol=1e-8)

    def test_kkt_on_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = int(rng.integers(20, 60))
            p = int(rng.integers(2, 8))
            X = rng.standard_normal((n, p))
            beta = rng.standard_normal(p) * (rng.random(p) < 0.5)
            y = X @ beta + rng.standard_normal(n)
            lam = float(rng.uniform(0.01, 0.5))
            fit = lasso_fit(X, y, lam)
            assert kkt_violation(X, y, fit) < 1e-6

    def test_rejects_nonfinite(self):
        X = np.ones((5, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            lasso_fit(X, np.ones(5), 0.1)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError, match="nonnegative"):
            lasso_fit(np.eye(3), np.ones(3), -0.1)


class TestLambdaGrid:
    def test_descending_and_ratio(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 4))
        y = rng.standard_normal(30)
        grid = lambda_grid(X, y, grid_size=100)
        assert grid.size == 100
        assert np.all(np.diff(grid) < 0)
        assert grid[-1] == pytest.approx(1e-3 * grid[0])


class TestMakeFolds:
    def test_partition_is_balanced(self):
        ids = make_folds(23, 5, np.random.default_rng(0))
        counts = np.bincount(ids, minlength=5)
        assert counts.sum() == 23
        assert counts.max() - counts.min() <= 1

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            make_folds(3, 5, np.random.default_rng(0))


class TestLassoCv:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((60, 6))
        y = X[:, 0] * 3 + rng.standard_normal(60)
        cv1, fit1 = lasso_cv(X, y, folds=5, rng=np.random.default_rng(7))
        cv2, fit2 = lasso_cv(X, y, folds=5, rng=np.random.default_rng(7))
        np.testing.assert_array_equal(cv1.cv_mean, cv2.cv_mean)
        np.testing.assert_array_equal(fit1.slopes, fit2.slopes)

    def test_strong_signal_always_selected(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((100, 8))
            y = 5.0 * X[:, 0] + rng.standard_normal(100)
            _, fit = lasso_cv(X, y, folds=5, rng=np.random.default_rng(seed + 100))
            assert fit.slopes[0] != 0.0

    def test_pure_noise_selects_little(self):
        nonzeros = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((200, 10))
            y = rng.standard_normal(200)
            _, fit = lasso_cv(X, y, folds=5, rng=np.random.default_rng(seed + 100))
            nonzeros.append(int(np.sum(fit.slopes != 0.0)))
        assert np.median(nonzeros) <= 2

    def test_lambda_min_attains_minimum(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((50, 5))
        y = X[:, 1] + rng.standard_normal(50)
        cv, _ = lasso_cv(X, y, folds=5, rng=rng)
        i = int(np.argmin(cv.cv_mean))
        assert cv.lambda_min == cv.lambdas[i]

    def test_one_se_rule_picks_larger_lambda(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((80, 6))
        y = 2 * X[:, 0] + rng.standard_normal(80)
        cv, fit = lasso_cv(X, y, folds=5, rng=np.random.default_rng(9), one_se=True)
        assert fit.lam == cv.lambda_1se
        assert cv.lambda_1se >= cv.lambda_min

    def test_n_smaller_than_folds_rejected(self):
        with pytest.raises(ValueError):
            lasso_cv(np.ones((3, 2)), np.ones(3), folds=5, rng=np.random.default_rng(0))
