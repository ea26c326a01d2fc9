import numpy as np
import pytest
from scipy import stats

from migselect.data import Dataset
from migselect.ols import OlsFit, fit_ols, t_statistic
from migselect.pooling import (barnard_rubin_df, partial_f_from_r2, pool_ols,
                               pooled_f_test_change_r2, pooled_r2,
                               pooled_t_test, refit_fmi)


def scalar_fit(beta, var, n=20):
    """Intercept + one slope with a fixed slope sampling variance."""
    return OlsFit(coef=np.array([0.0, beta]), sigma2=1.0,
                  xtx_inv=np.diag([1.0, var]), r2=0.3,
                  residuals=np.zeros(n), n=n, k=1)


def random_fits(seed, m=4, n=40, k=3, jitter=0.1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    beta = np.array([1.0, -1.0, 0.5])
    fits = []
    for _ in range(m):
        y = X @ beta + rng.standard_normal(n) * (1 + jitter)
        fits.append(fit_ols(X, y))
    return fits


class TestPoolOls:
    def test_worked_scalar_example(self):
        # two fits with slopes 1 and 3, each slope variance 0.5:
        # beta_bar = 2, U = 0.5, B = 2, T = 0.5 + 1.5*2 = 3.5, fmi ~ 0.857
        pf = pool_ols([scalar_fit(1.0, 0.5), scalar_fit(3.0, 0.5)])
        assert pf.beta_bar[1] == pytest.approx(2.0)
        assert pf.within[1, 1] == pytest.approx(0.5)
        assert pf.between[1, 1] == pytest.approx(2.0)
        assert pf.total[1, 1] == pytest.approx(3.5)
        assert pf.fmi[1] == pytest.approx(3.0 / 3.5, abs=1e-12)

    def test_identical_fits_collapse(self):
        fit = scalar_fit(1.5, 0.2)
        pf = pool_ols([fit, fit, fit])
        assert np.allclose(pf.between, 0.0)
        np.testing.assert_allclose(pf.total, pf.within)
        assert pf.phi == 0.0

    def test_total_identity(self):
        fits = random_fits(0)
        pf = pool_ols(fits)
        m = pf.m
        np.testing.assert_allclose(
            pf.total, pf.within + (m + 1) / m * pf.between, atol=1e-12)

    def test_permutation_invariant(self):
        fits = random_fits(1)
        a = pool_ols(fits)
        b = pool_ols(fits[::-1])
        np.testing.assert_allclose(a.beta_bar, b.beta_bar, atol=1e-15)
        np.testing.assert_allclose(a.total, b.total, atol=1e-15)

    def test_single_fit_rejected(self):
        with pytest.raises(ValueError, match="M >= 2"):
            pool_ols([scalar_fit(1.0, 0.5)])

    def test_phi_shrinks_with_between_spread(self):
        # scaling the coefficient spread toward zero drives phi to zero
        phis = []
        for scale in (1.0, 0.5, 0.1, 0.0):
            fits = [scalar_fit(2.0 - scale, 0.5), scalar_fit(2.0 + scale, 0.5)]
            phis.append(pool_ols(fits).phi)
        assert all(a >= b for a, b in zip(phis, phis[1:]))
        assert phis[-1] == 0.0


class TestBarnardRubinDf:
    def test_never_exceeds_complete_data_df(self):
        for b in (0.0, 0.1, 1.0, 10.0):
            df = barnard_rubin_df(b, 0.5, 0.5 + 1.5 * b, 2, nu_com=17)
            assert df <= 17

    def test_grows_toward_old_formula_with_n(self):
        # with nu_com large, df approaches (M-1)(1+1/r)^2
        b, u, m = 1.0, 0.5, 2
        t = u + (m + 1) / m * b
        r = (1 + 1 / m) * b / u
        nu_old = (m - 1) * (1 + 1 / r) ** 2
        df_big = barnard_rubin_df(b, u, t, m, nu_com=1e9)
        assert df_big == pytest.approx(nu_old, rel=1e-6)


class TestPooledTTest:
    def test_worked_example_t(self):
        pf = pool_ols([scalar_fit(1.0, 0.5), scalar_fit(3.0, 0.5)])
        t, df, p, sig = pooled_t_test(pf, 1)
        assert t == pytest.approx(2.0 / np.sqrt(3.5), abs=1e-12)
        assert 0 < p < 1

    def test_zero_estimate_not_significant(self):
        pf = pool_ols([scalar_fit(-1.0, 0.5), scalar_fit(1.0, 0.5)])
        t, _, p, sig = pooled_t_test(pf, 1)
        assert t == pytest.approx(0.0, abs=1e-15)
        assert p == pytest.approx(1.0)
        assert not sig

    def test_b_zero_limit_matches_single_dataset_t(self):
        fit = random_fits(2, m=1)[0]
        pf = pool_ols([fit, fit])
        t_pooled, df, p_pooled, _ = pooled_t_test(pf, 1)
        t_single, _ = t_statistic(fit, 1)
        assert t_pooled == pytest.approx(t_single, rel=1e-12)
        assert df <= fit.n - fit.k - 1


class TestPooledFTest:
    def test_equal_r2_gives_f_zero(self):
        def fake(r2, k):
            return OlsFit(coef=np.zeros(k + 1), sigma2=1.0,
                          xtx_inv=np.eye(k + 1), r2=r2,
                          residuals=np.zeros(30), n=30, k=k)
        res = pooled_f_test_change_r2([fake(0.5, 1)] * 3, [fake(0.5, 2)] * 3, 30)
        assert res.f_stat == 0.0
        assert res.p_value == pytest.approx(1.0)

    def test_negative_delta_clamped(self):
        # engineer HA fits with smaller R^2 than H0 via synthetic OlsFits
        def fake(r2, k):
            return OlsFit(coef=np.zeros(k + 1), sigma2=1.0,
                          xtx_inv=np.eye(k + 1), r2=r2,
                          residuals=np.zeros(30), n=30, k=k)
        res = pooled_f_test_change_r2([fake(0.6, 1)] * 3, [fake(0.4, 2)] * 3, 30)
        assert res.f_stat == 0.0
        assert res.p_value == pytest.approx(1.0)

    def test_m1_reduction_to_classical_partial_f(self):
        # R0^2 = 0.5, RA^2 = 0.75, nu2 = 10: F = 0.25 / (0.25/10) = 10
        assert partial_f_from_r2(0.5, 0.75, 10.0) == pytest.approx(10.0)

    def test_saturated_model_flag(self):
        def fake(r2, k):
            return OlsFit(coef=np.zeros(k + 1), sigma2=1.0,
                          xtx_inv=np.eye(k + 1), r2=r2,
                          residuals=np.zeros(30), n=30, k=k)
        res = pooled_f_test_change_r2([fake(0.5, 1)] * 2, [fake(1.0, 2)] * 2, 30)
        assert res.saturated
        assert res.p_value == 0.0

    def test_arity_mismatch_rejected(self):
        fits = random_fits(4)
        with pytest.raises(ValueError, match="exactly one"):
            pooled_f_test_change_r2(fits, fits, 40)

    def test_pooled_r2_is_fisher_z_mean(self):
        fits = random_fits(5)
        r = np.sqrt([f.r2 for f in fits])
        expected = np.tanh(np.mean(np.arctanh(r))) ** 2
        assert pooled_r2(fits) == pytest.approx(expected, abs=1e-12)


class TestRefitFmi:
    @staticmethod
    def masked_ds(seed=0, n=50, p=5, rate=0.15):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        y = X @ np.linspace(1, 2, p) + rng.standard_normal(n)
        mask = rng.random((n, p)) < rate
        mask[:5] = False
        return Dataset(y=y, X=X, mask=mask,
                       names=tuple(f"x{j + 1}" for j in range(p)))

    def test_no_missingness_reports_zero_with_flag(self):
        ds = self.masked_ds(rate=0.0)
        rf = refit_fmi(ds, [0, 1], m=3, rng=np.random.default_rng(0))
        assert rf.phi_selected == 0.0
        assert rf.ratio == 0.0
        assert rf.full_model_zero

    def test_all_columns_gives_ratio_one(self):
        ds = self.masked_ds(seed=1)
        rf = refit_fmi(ds, range(ds.p), m=3, rng=np.random.default_rng(1))
        assert rf.ratio == 1.0
        assert not rf.full_model_zero

    def test_smaller_model_can_have_smaller_phi(self):
        # small-n instance shaped like a survey extract: a 2-variable
        # refit with less missingness exposure can beat the full model
        seen_below_one = False
        for seed in range(8):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((39, 9))
            y = X[:, 0] * 2 + X[:, 1] + rng.standard_normal(39)
            mask = rng.random((39, 9)) < 0.12
            mask[:, :2] = False
            mask[:10] = False
            ds = Dataset(y=y, X=X, mask=mask,
                         names=tuple(f"x{j + 1}" for j in range(9)))
            rf = refit_fmi(ds, [0, 1], m=5, rng=np.random.default_rng(seed + 50))
            if not rf.full_model_zero and rf.ratio < 1.0:
                seen_below_one = True
                break
        assert seen_below_one

    def test_empty_selection_rejected(self):
        ds = self.masked_ds(seed=2)
        with pytest.raises(ValueError, match="empty"):
            refit_fmi(ds, [], m=3, rng=np.random.default_rng(0))
