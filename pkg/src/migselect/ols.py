"""Ordinary least squares with the quantities needed for MI pooling.

Coefficients are solved through a QR factorization; (X'X)^-1 is formed
from the R factor rather than by inverting the normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats


class SingularDesignError(np.linalg.LinAlgError):
    """Design matrix is (numerically) rank deficient."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"design is rank deficient at column {column} (0 = intercept)")


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit of y on an intercept plus k slope columns.

    coef[0] is the intercept; coef[1:] are the slopes. sigma2 uses the
    unbiased divisor n - k - 1, and xtx_inv is the (k+1)x(k+1) inverse
    of the design cross-product including the intercept column.
    """

    coef: np.ndarray
    sigma2: float
    xtx_inv: np.ndarray
    r2: float
    residuals: np.ndarray
    n: int
    k: int


def fit_ols(X_sub: np.ndarray, y: np.ndarray) -> OlsFit:
    """Fit y = b0 + X_sub b + e by least squares.

    X_sub may have zero columns (intercept-only model). Raises
    SingularDesignError when the design is numerically rank deficient.
    """
    y = np.asarray(y, dtype=float)
    X_sub = np.asarray(X_sub, dtype=float)
    if X_sub.ndim == 1:
        X_sub = X_sub[:, None]
    n = y.shape[0]
    k = X_sub.shape[1]
    if n <= k + 1:
        raise ValueError(f"need n > k + 1 (n={n}, k={k})")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X_sub))):
        raise ValueError("non-finite values in OLS inputs")

    design = np.column_stack([np.ones(n), X_sub])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = max(n, k + 1) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = np.flatnonzero(diag <= tol)
    if bad.size:
        raise SingularDesignError(int(bad[0]))

    coef = linalg.solve_triangular(r, q.T @ y)
    r_inv = linalg.solve_triangular(r, np.eye(k + 1))
    xtx_inv = r_inv @ r_inv.T
    residuals = y - design @ coef
    rss = float(residuals @ residuals)
    tss = float(np.sum((y - y.mean()) ** 2))
    sigma2 = rss / (n - k - 1)
    r2 = 0.0 if tss <= 0.0 else float(np.clip(1.0 - rss / tss, 0.0, 1.0))
    return OlsFit(coef=coef, sigma2=max(sigma2, 0.0), xtx_inv=xtx_inv, r2=r2,
                  residuals=residuals, n=n, k=k)


def t_statistic(fit: OlsFit, j: int) -> tuple[float, float]:
    """Two-sided t test of coefficient j (0 = intercept) being zero.

    Returns (t, p) with df = n - k - 1. A zero residual variance is
    treated as infinite precision: p = 0 for any nonzero coefficient.
    """
    df = fit.n - fit.k - 1
    beta = float(fit.coef[j])
    var = fit.sigma2 * float(fit.xtx_inv[j, j])
    if var <= 0.0:
        if beta == 0.0:
            return 0.0, 1.0
        return float(np.inf) * np.sign(beta), 0.0
    t = beta / np.sqrt(var)
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return float(t), min(p, 1.0)
