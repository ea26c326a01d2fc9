"""Multiple imputation by chained equations over a column subset.

Each incomplete column is imputed by Bayesian linear regression on the
other columns in the subset plus the response: posterior draws of the
residual variance (scaled inverse chi-square) and the coefficients
(normal around the ridge-stabilized OLS estimate), then missing cells
are filled with the linear prediction plus Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

RIDGE_FACTOR = 1e-6


class UnimputableColumnError(ValueError):
    """A column selected for imputation has no observed values."""

    def __init__(self, column: int, name: str):
        self.column = column
        self.name = name
        super().__init__(f"column {name!r} (index {column}) has no observed values")


@dataclass(frozen=True)
class ImputedSet:
    """M completed matrices over the columns in `cols`.

    Every observed cell is bit-exactly equal to the source dataset in
    all M matrices; only originally-missing cells vary across them.
    """

    matrices: tuple[np.ndarray, ...]
    cols: tuple[int, ...]
    y: np.ndarray
    mask: np.ndarray
    m: int
    n_iter: int
    visit_order: tuple[int, ...]

    def __post_init__(self):
        for mat in self.matrices:
            mat.setflags(write=False)


def _draw_fill(X_design: np.ndarray, target: np.ndarray, obs: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    """Posterior-draw imputations for the rows where `obs` is False.

    X_design includes the intercept column. Returns the filled values
    for the missing rows of `target`.
    """
    Xo = X_design[obs]
    yo = target[obs]
    n_obs, q = Xo.shape
    xtx = Xo.T @ Xo
    ridge = RIDGE_FACTOR * float(np.trace(xtx)) / q
    A = xtx + ridge * np.eye(q)
    try:
        A_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("imputation design singular after ridge") from exc
    beta_hat = A_inv @ (Xo.T @ yo)
    resid = yo - Xo @ beta_hat
    df = max(n_obs - q, 1)
    rss = float(resid @ resid)
    sigma2_star = rss / rng.chisquare(df) if rss > 0 else 0.0
    if sigma2_star > 0:
        cov = sigma2_star * A_inv
        beta_star = rng.multivariate_normal(beta_hat, cov, method="cholesky",
                                            check_valid="ignore")
    else:
        beta_star = beta_hat
    Xm = X_design[~obs]
    return Xm @ beta_star + rng.normal(0.0, np.sqrt(sigma2_star), size=Xm.shape[0])


def _run_chain(X0: np.ndarray, y: np.ndarray, mask: np.ndarray,
               visit: list[int], n_iter: int, rng: np.random.Generator) -> np.ndarray:
    """One chained-equations chain; X0 columns are the working subset."""
    X = X0.copy()
    # initialize missing cells with draws from each column's observed values
    for j in visit:
        miss = mask[:, j]
        obs_vals = X[~miss, j]
        X[miss, j] = rng.choice(obs_vals, size=int(miss.sum()), replace=True)
    for _ in range(n_iter):
        for j in visit:
            miss = mask[:, j]
            others = [c for c in range(X.shape[1]) if c != j]
            design = np.column_stack([np.ones(X.shape[0]), X[:, others], y])
            X[miss, j] = _draw_fill(design, X[:, j], ~miss, rng)
    return X


def mice_impute(ds: Dataset, cols, m: int, n_iter: int,
                rng: np.random.Generator) -> ImputedSet:
    """Produce M completed matrices for the columns in `cols`.

    The response is used as a predictor in every conditional model but
    is never imputed. The M chains run on independent substreams of
    `rng`, so results do not depend on chain scheduling.
    """
    cols = tuple(sorted(int(c) for c in cols))
    if m < 1:
        raise ValueError("need m >= 1")
    if not cols:
        raise ValueError("empty column subset")
    sub_mask = ds.mask[:, cols]
    for local, c in enumerate(cols):
        if sub_mask[:, local].all():
            raise UnimputableColumnError(c, ds.names[c])

    X0 = ds.X[:, cols].copy()
    X0[sub_mask] = np.nan  # poison: every source missing cell must be overwritten
    incomplete = [j for j in range(len(cols)) if sub_mask[:, j].any()]
    # visit columns by ascending missing count
    visit = sorted(incomplete, key=lambda j: (int(sub_mask[:, j].sum()), j))

    streams = rng.spawn(m)
    matrices = []
    for chain_rng in streams:
        if visit:
            matrices.append(_run_chain(X0, ds.y, sub_mask, visit, n_iter, chain_rng))
        else:
            matrices.append(X0.copy())
    return ImputedSet(matrices=tuple(matrices), cols=cols, y=ds.y,
                      mask=sub_mask.copy(), m=m, n_iter=n_iter,
                      visit_order=tuple(cols[j] for j in visit))
