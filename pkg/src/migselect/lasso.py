"""L1-penalized least squares via cyclic coordinate descent.

Objective convention: (1/(2n)) * ||y - b0 - X b||^2 + lambda * ||b_std||_1,
with the penalty applied to slopes of internally standardized predictors
(each column centered and scaled to x'x/n = 1). Under this convention
lambda_max = max_j |x_j' (y - ybar)| / n shrinks every slope to zero.
Returned coefficients are on the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LassoFit:
    intercept: float
    slopes: np.ndarray
    slopes_std: np.ndarray
    lam: float
    iterations: int
    objective: float


@dataclass(frozen=True)
class CvResult:
    """Cross-validation summary over a descending lambda grid."""

    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    lambda_min: float
    lambda_1se: float
    fold_ids: np.ndarray


def soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def _standardize_design(X: np.ndarray, y: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    dead = scale == 0.0
    scale = np.where(dead, 1.0, scale)
    Xs = (X - mean) / scale
    if dead.any():
        Xs[:, dead] = 0.0
    y_mean = y.mean()
    return Xs, y - y_mean, mean, scale, y_mean, dead


def _cd(G: np.ndarray, xy: np.ndarray, lam: float, b: np.ndarray,
        tol: float = 1e-7, max_iter: int = 10_000) -> tuple[np.ndarray, int]:
    """Cyclic coordinate descent on the standardized-scale problem.

    G = Xs'Xs/n with unit diagonal, xy = Xs'yc/n. b is the warm start
    (modified in place). Converges when the largest coordinate update in
    a sweep falls below tol.
    """
    p = b.shape[0]
    c = xy - G @ b
    it = 0
    for it in range(1, max_iter + 1):
        delta = 0.0
        for j in range(p):
            bj = b[j]
            z = c[j] + bj
            nb = soft_threshold(z, lam)
            if nb != bj:
                c -= G[:, j] * (nb - bj)
                step = abs(nb - bj)
                if step > delta:
                    delta = step
                b[j] = nb
        if delta < tol:
            break
    return b, it


def _check_inputs(X: np.ndarray, y: np.ndarray):
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in lasso inputs")


def lasso_fit(X: np.ndarray, y: np.ndarray, lam: float,
              tol: float = 1e-7, max_iter: int = 10_000) -> LassoFit:
    """Fit the lasso at a single penalty level."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inputs(X, y)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n, p = X.shape
    Xs, yc, mean, scale, y_mean, dead = _standardize_design(X, y)
    G = Xs.T @ Xs / n
    np.fill_diagonal(G, np.where(dead, 1.0, np.diag(G)))
    xy = Xs.T @ yc / n
    b, it = _cd(G, xy, lam, np.zeros(p), tol=tol, max_iter=max_iter)
    slopes = b / scale
    intercept = y_mean - float(slopes @ mean)
    resid = yc - Xs @ b
    obj = float(resid @ resid) / (2 * n) + lam * float(np.abs(b).sum())
    return LassoFit(intercept=float(intercept), slopes=slopes, slopes_std=b.copy(),
                    lam=float(lam), iterations=it, objective=obj)


def _path_std(Xs: np.ndarray, yc: np.ndarray, grid: np.ndarray,
              tol: float = 1e-7) -> np.ndarray:
    """Warm-started standardized-scale slopes along a descending grid."""
    n, p = Xs.shape
    G = Xs.T @ Xs / n
    xy = Xs.T @ yc / n
    out = np.zeros((grid.size, p))
    b = np.zeros(p)
    for i, lam in enumerate(grid):
        b, _ = _cd(G, xy, float(lam), b, tol=tol)
        out[i] = b
    return out


def lambda_grid(X: np.ndarray, y: np.ndarray, grid_size: int = 100,
                ratio: float = 1e-3) -> np.ndarray:
    """Descending log-spaced grid from lambda_max down to ratio*lambda_max."""
    Xs, yc, *_ = _standardize_design(np.asarray(X, float), np.asarray(y, float))
    lam_max = float(np.abs(Xs.T @ yc).max()) / len(y)
    lam_max = max(lam_max, 1e-12)
    return np.geomspace(lam_max, ratio * lam_max, grid_size)


def make_folds(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold labels from a seeded shuffle cut into contiguous blocks."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"n={n} is smaller than the number of folds {folds}")
    perm = rng.permutation(n)
    fold_ids = np.empty(n, dtype=int)
    for f, block in enumerate(np.array_split(perm, folds)):
        fold_ids[block] = f
    return fold_ids


def lasso_cv(X: np.ndarray, y: np.ndarray, folds: int, rng: np.random.Generator | None = None,
             grid_size: int = 100, one_se: bool = False,
             fold_ids: np.ndarray | None = None) -> tuple[CvResult, LassoFit]:
    """K-fold cross-validated lasso.

    Folds are contiguous blocks of a seeded shuffle (or caller-supplied
    fold labels). Returns the CV summary and a refit on the full data at
    the selected lambda (lambda_min by default, the one-standard-error
    choice with one_se).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inputs(X, y)
    n, p = X.shape
    if fold_ids is None:
        if rng is None:
            raise ValueError("either rng or fold_ids is required")
        fold_ids = make_folds(n, folds, rng)
    else:
        fold_ids = np.asarray(fold_ids, dtype=int)

    grid = lambda_grid(X, y, grid_size=grid_size)

    fold_err = np.empty((folds, grid.size))
    for f in range(folds):
        val = fold_ids == f
        Xtr, ytr = X[~val], y[~val]
        Xs, yc, mean, scale, y_mean, _ = _standardize_design(Xtr, ytr)
        path = _path_std(Xs, yc, grid)
        slopes = path / scale
        intercepts = y_mean - slopes @ mean
        pred = X[val] @ slopes.T + intercepts
        fold_err[f] = np.mean((y[val][:, None] - pred) ** 2, axis=0)

    cv_mean = fold_err.mean(axis=0)
    cv_se = fold_err.std(axis=0, ddof=1) / np.sqrt(folds)
    i_min = int(np.argmin(cv_mean))
    lambda_min = float(grid[i_min])
    # largest lambda within one se of the minimum (grid is descending)
    within = np.flatnonzero(cv_mean <= cv_mean[i_min] + cv_se[i_min])
    lambda_1se = float(grid[int(within[0])])
    result = CvResult(lambdas=grid, cv_mean=cv_mean, cv_se=cv_se,
                      lambda_min=lambda_min, lambda_1se=lambda_1se, fold_ids=fold_ids)

    chosen = lambda_1se if one_se else lambda_min
    # refit along the full-data path down to the chosen lambda (warm starts)
    sub = grid[grid >= chosen - 1e-15]
    Xs, yc, mean, scale, y_mean, _ = _standardize_design(X, y)
    b = _path_std(Xs, yc, sub)[-1]
    slopes = b / scale
    intercept = y_mean - float(slopes @ mean)
    resid = yc - Xs @ b
    obj = float(resid @ resid) / (2 * n) + chosen * float(np.abs(b).sum())
    fit = LassoFit(intercept=intercept, slopes=slopes, slopes_std=b.copy(),
                   lam=float(chosen), iterations=0, objective=obj)
    return result, fit
