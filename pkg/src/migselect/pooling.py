"""Rubin's-rule combination of M per-imputation OLS fits.

Covers the pooled coefficient vector with within/between/total
covariance, the fraction of missing information, small-sample
Barnard-Rubin degrees of freedom, the pooled t test, and the pooled
F test for the change in R^2 (Fisher-Z pooled R across imputations).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .data import Dataset
from .mice import mice_impute
from .ols import OlsFit, fit_ols


@dataclass(frozen=True)
class PooledFit:
    """Rubin-pooled OLS over M imputations.

    beta_bar[0] is the intercept. fmi is per coefficient; phi averages
    the (1+1/M) tr(B T^-1) contributions of the k slope coefficients,
    excluding the intercept. df holds the per-coefficient Barnard-Rubin
    degrees of freedom with nu_com = n - k - 1.
    """

    beta_bar: np.ndarray
    within: np.ndarray
    between: np.ndarray
    total: np.ndarray
    fmi: np.ndarray
    phi: float
    df: np.ndarray
    m: int
    n: int
    k: int


@dataclass(frozen=True)
class PooledFtest:
    f_stat: float
    nu1: int
    nu2: float
    p_value: float
    r2_h0: float
    r2_ha: float
    saturated: bool = False


@dataclass(frozen=True)
class RefitFmi:
    phi_selected: float
    phi_full: float
    ratio: float
    full_model_zero: bool


def barnard_rubin_df(b_jj: float, u_jj: float, t_jj: float, m: int, nu_com: float) -> float:
    """Small-sample MI degrees of freedom for one scalar estimate."""
    nu_com = max(float(nu_com), 1.0)
    gamma = (1.0 + 1.0 / m) * b_jj / t_jj if t_jj > 0 else 0.0
    gamma = min(max(gamma, 0.0), 1.0)
    nu_obs = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - gamma)
    if b_jj <= 0 or u_jj <= 0:
        return max(nu_obs, 1.0)
    r = (1.0 + 1.0 / m) * b_jj / u_jj
    nu_old = (m - 1) * (1.0 + 1.0 / r) ** 2
    return max(1.0 / (1.0 / nu_old + 1.0 / nu_obs), 1.0)


def pool_ols(fits: Sequence[OlsFit]) -> PooledFit:
    """Combine M OLS fits over an identical column set by Rubin's rule."""
    m = len(fits)
    if m < 2:
        raise ValueError("pooling requires M >= 2 fits (between-variance undefined)")
    n, k = fits[0].n, fits[0].k
    if any(f.n != n or f.k != k for f in fits):
        raise ValueError("fits must share n and column set")

    betas = np.stack([f.coef for f in fits])
    beta_bar = betas.mean(axis=0)
    within = np.mean([f.sigma2 * f.xtx_inv for f in fits], axis=0)
    dev = betas - beta_bar
    between = dev.T @ dev / (m - 1)
    total = within + (m + 1) / m * between

    t_diag = np.diag(total)
    with np.errstate(divide="ignore", invalid="ignore"):
        fmi = np.where(t_diag > 0, (1.0 + 1.0 / m) * np.diag(between) / t_diag, 0.0)
    if np.allclose(between, 0.0):
        phi = 0.0
    else:
        ratios = np.diag(between @ np.linalg.inv(total))
        phi = float((1.0 + 1.0 / m) * ratios[1:].sum() / max(k, 1))
        phi = min(max(phi, 0.0), 1.0)

    nu_com = n - k - 1
    df = np.array([
        barnard_rubin_df(between[j, j], within[j, j], total[j, j], m, nu_com)
        for j in range(k + 1)
    ])
    return PooledFit(beta_bar=beta_bar, within=within, between=between, total=total,
                     fmi=fmi, phi=phi, df=df, m=m, n=n, k=k)


def pooled_t_test(pf: PooledFit, j: int, alpha: float = 0.05) -> tuple[float, float, float, bool]:
    """Pooled t test of coefficient j (0 = intercept) being zero.

    Returns (t, df, p, significant). A zero total variance with a
    nonzero estimate is flagged significant with p = 0.
    """
    beta = float(pf.beta_bar[j])
    t_jj = float(pf.total[j, j])
    df = float(pf.df[j])
    if t_jj <= 0:
        if beta == 0.0:
            return 0.0, df, 1.0, False
        return float(np.inf) * np.sign(beta), df, 0.0, True
    t = beta / np.sqrt(t_jj)
    p = min(2.0 * float(stats.t.sf(abs(t), df)), 1.0)
    return float(t), df, p, p < alpha


def pooled_r2(fits: Sequence[OlsFit]) -> float:
    """Pool per-imputation R^2 through the Fisher Z transform of R."""
    r = np.sqrt(np.clip([f.r2 for f in fits], 0.0, 1.0 - 1e-12))
    z_bar = float(np.arctanh(r).mean())
    return float(np.tanh(z_bar) ** 2)


def partial_f_from_r2(r2_h0: float, r2_ha: float, nu2: float) -> float:
    """Partial F statistic for a one-variable change in R^2, clamped at 0."""
    if r2_ha >= 1.0:
        return float(np.inf)
    return max((r2_ha - r2_h0) / ((1.0 - r2_ha) / nu2), 0.0)


def pooled_f_test_change_r2(fits_h0: Sequence[OlsFit], fits_ha: Sequence[OlsFit],
                            n: int) -> PooledFtest:
    """Pooled F test that the single extra column in the HA fits is null.

    R^2 values are pooled by the Fisher Z transform of R. nu2 is the
    Barnard-Rubin df applied to the Z scores of the HA model with
    within-variance 1/(n-3) and nu_com = n - (k_HA + 1). A negative
    change in pooled R^2 is reported as F = 0.
    """
    if len(fits_h0) != len(fits_ha):
        raise ValueError("paired fits required")
    m = len(fits_ha)
    k_ha = fits_ha[0].k
    if k_ha != fits_h0[0].k + 1:
        raise ValueError("HA design must add exactly one column to H0")
    r2_h0 = pooled_r2(fits_h0)
    r2_ha = pooled_r2(fits_ha)

    z = np.arctanh(np.sqrt(np.clip([f.r2 for f in fits_ha], 0.0, 1.0 - 1e-12)))
    b_z = float(z.var(ddof=1)) if m > 1 else 0.0
    u_z = 1.0 / max(n - 3, 1)
    t_z = u_z + (m + 1) / m * b_z
    nu_com = n - (k_ha + 1)
    nu2 = barnard_rubin_df(b_z, u_z, t_z, max(m, 2), nu_com)

    if max(f.r2 for f in fits_ha) >= 1.0 - 1e-12:
        return PooledFtest(f_stat=float(np.inf), nu1=1, nu2=nu2, p_value=0.0,
                           r2_h0=r2_h0, r2_ha=r2_ha, saturated=True)
    f_stat = partial_f_from_r2(r2_h0, r2_ha, nu2)
    p = float(stats.f.sf(f_stat, 1, nu2))
    return PooledFtest(f_stat=f_stat, nu1=1, nu2=nu2, p_value=p,
                       r2_h0=r2_h0, r2_ha=r2_ha)


def _pooled_phi(ds: Dataset, cols: tuple[int, ...], m: int,
                rng: np.random.Generator) -> float:
    imp = mice_impute(ds, cols, m=m, n_iter=5, rng=rng)
    fits = [fit_ols(mat, ds.y) for mat in imp.matrices]
    return pool_ols(fits).phi


def refit_fmi(ds: Dataset, selected, m: int, rng: np.random.Generator) -> RefitFmi:
    """Average fmi of refitting the selected model, and its ratio to the
    full p-variable model's fmi (independent imputation substream)."""
    selected = tuple(sorted(int(c) for c in selected))
    if not selected:
        raise ValueError("selected column set is empty")
    full_rng, sel_rng = rng.spawn(2)
    all_cols = tuple(range(ds.p))
    phi_full = _pooled_phi(ds, all_cols, m, full_rng)
    if selected == all_cols:
        phi_sel = phi_full
    else:
        phi_sel = _pooled_phi(ds, selected, m, sel_rng)
    if phi_full == 0.0:
        return RefitFmi(phi_selected=phi_sel, phi_full=0.0, ratio=0.0, full_model_zero=True)
    return RefitFmi(phi_selected=phi_sel, phi_full=phi_full,
                    ratio=phi_sel / phi_full, full_model_zero=False)
