"""Comparison selectors: listwise deletion, pooled MI least squares,
and the per-imputation / stacked lasso strategies."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset, complete_cases
from .lasso import lasso_cv, make_folds
from .mice import mice_impute
from .ols import fit_ols, t_statistic
from .pooling import pool_ols, pooled_t_test


class MethodInfeasibleError(RuntimeError):
    """The method cannot run on this dataset (for example, too few
    complete cases for the model dimension)."""


@dataclass(frozen=True)
class BaselineResult:
    method: str
    selected: tuple[int, ...]
    intercept: float
    coef: np.ndarray  # length p, zeros off the selected set
    seconds: float


def _result(method: str, p: int, intercept: float, slopes_by_col: dict[int, float],
            t0: float) -> BaselineResult:
    coef = np.zeros(p)
    for j, b in slopes_by_col.items():
        coef[j] = b
    selected = tuple(sorted(j for j, b in slopes_by_col.items() if b != 0.0))
    return BaselineResult(method=method, selected=selected, intercept=intercept,
                          coef=coef, seconds=time.perf_counter() - t0)


def ldls(ds: Dataset, alpha: float = 0.05,
         max_drop_fraction: float = 0.2) -> BaselineResult:
    """OLS on complete cases; insignificant coefficients zeroed.

    When there are too few complete cases for the full model, the fit is
    truncated to the q = n_cc - 3 best-conditioned columns (pivoted QR on
    the centered design), so at least two residual degrees of freedom
    remain; dropped columns count as not selected. The method refuses to
    run when it would have to drop more than max_drop_fraction of the
    columns this way.
    """
    t0 = time.perf_counter()
    cc = complete_cases(ds)
    q = min(ds.p, cc.size - 3)
    if q < 1 or (ds.p - q) / ds.p > max_drop_fraction:
        raise MethodInfeasibleError(
            f"LDLS cannot fit p={ds.p} columns on {cc.size} complete cases")
    Xc = ds.X[cc]
    if q < ds.p:
        centered = Xc - Xc.mean(axis=0)
        _, _, pivot = scipy.linalg.qr(centered, mode="economic", pivoting=True)
        cols = np.sort(pivot[:q])
    else:
        cols = np.arange(ds.p)
    fit = fit_ols(Xc[:, cols], ds.y[cc])
    kept = {}
    for idx, j in enumerate(cols):
        _, pval = t_statistic(fit, idx + 1)
        if pval < alpha:
            kept[int(j)] = float(fit.coef[idx + 1])
    return _result("ldls", ds.p, float(fit.coef[0]), kept, t0)


def mils(ds: Dataset, m: int, alpha: float, rng: np.random.Generator,
         n_iter: int = 5) -> BaselineResult:
    """Impute all columns, pool M OLS fits, zero the pooled-t-insignificant."""
    t0 = time.perf_counter()
    imp = mice_impute(ds, range(ds.p), m=m, n_iter=n_iter, rng=rng)
    fits = [fit_ols(mat, ds.y) for mat in imp.matrices]
    pf = pool_ols(fits)
    kept = {}
    for j in range(ds.p):
        _, _, pval, sig = pooled_t_test(pf, j + 1, alpha)
        if sig:
            kept[j] = float(pf.beta_bar[j + 1])
    return _result("mils", ds.p, float(pf.beta_bar[0]), kept, t0)


def ld_lasso_cv(ds: Dataset, folds: int, rng: np.random.Generator,
                grid_size: int = 100) -> BaselineResult:
    """Cross-validated lasso on the complete cases."""
    t0 = time.perf_counter()
    cc = complete_cases(ds)
    if cc.size < folds:
        raise ValueError(f"{cc.size} complete cases is fewer than {folds} folds")
    _, fit = lasso_cv(ds.X[cc], ds.y[cc], folds=folds, rng=rng, grid_size=grid_size)
    kept = {j: float(fit.slopes[j]) for j in np.flatnonzero(fit.slopes != 0.0)}
    return _result("ld_lasso_cv", ds.p, fit.intercept, kept, t0)


def mi_lasso_separate(ds: Dataset, m: int, folds: int, mode: str,
                      rng: np.random.Generator, n_iter: int = 5,
                      grid_size: int = 100) -> BaselineResult:
    """Lasso on each imputed dataset; keep columns nonzero in enough fits.

    mode: 'any' (>= 1 fit), 'half' (>= ceil(M/2)), or 'all' (M fits).
    Kept-column coefficients are the mean of the M lasso coefficients,
    zeros included.
    """
    if mode not in ("any", "half", "all"):
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.perf_counter()
    imp_rng, cv_rng = rng.spawn(2)
    imp = mice_impute(ds, range(ds.p), m=m, n_iter=n_iter, rng=imp_rng)
    # one fold assignment shared by the M fits keeps them comparable
    fold_ids = make_folds(ds.n, folds, cv_rng)
    all_slopes = []
    intercepts = []
    for mat in imp.matrices:
        _, fit = lasso_cv(mat, ds.y, folds=folds, fold_ids=fold_ids, grid_size=grid_size)
        all_slopes.append(fit.slopes)
        intercepts.append(fit.intercept)
    slopes = np.stack(all_slopes)
    support = (slopes != 0.0).sum(axis=0)
    need = {"any": 1, "half": int(np.ceil(m / 2)), "all": m}[mode]
    mean_slopes = slopes.mean(axis=0)
    kept = {int(j): float(mean_slopes[j]) for j in np.flatnonzero(support >= need)}
    return _result(f"mi_lasso_s{('any', 'half', 'all').index(mode) + 1}",
                   ds.p, float(np.mean(intercepts)), kept, t0)


def mi_stacked(ds: Dataset, m: int, folds: int, rng: np.random.Generator,
               n_iter: int = 5, grid_size: int = 100) -> BaselineResult:
    """Lasso on the M stacked imputed matrices with uniform 1/M weights.

    With equal weights the weighted objective coincides with the
    standard 1/(2N) lasso objective on the stack, so no explicit weight
    machinery is needed.
    """
    t0 = time.perf_counter()
    imp_rng, cv_rng = rng.spawn(2)
    imp = mice_impute(ds, range(ds.p), m=m, n_iter=n_iter, rng=imp_rng)
    X_stack = np.vstack(imp.matrices)
    y_stack = np.tile(ds.y, m)
    _, fit = lasso_cv(X_stack, y_stack, folds=folds, rng=cv_rng, grid_size=grid_size)
    kept = {int(j): float(fit.slopes[j]) for j in np.flatnonzero(fit.slopes != 0.0)}
    return _result("mi_stacked", ds.p, fit.intercept, kept, t0)
