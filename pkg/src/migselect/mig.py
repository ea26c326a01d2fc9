"""Greedy forward selection on multiply imputed data.

Initialization seeds the candidate pool with a cross-validated lasso on
the complete cases, keeps the pooled-t-significant variables as the
initial active set, then repeatedly: evaluates the likelihood gradient
of every remaining candidate on its available rows, picks one variable
by the configured pooling rule, re-imputes the enlarged column set, and
keeps the variable only if the pooled F test for the change in R^2 is
significant. Selection stops at the first rejected variable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import Dataset, complete_cases, rows_observed_on, standardize
from .lasso import lasso_cv
from .mice import ImputedSet, mice_impute
from .ols import OlsFit, fit_ols
from .pooling import PooledFit, PooledFtest, pool_ols, pooled_f_test_change_r2, pooled_t_test
from .rng import substream


class InitializationError(RuntimeError):
    """No complete cases available for the lasso initialization."""


class EmptySupportError(RuntimeError):
    """No rows are observed on all remaining candidate columns."""


class PoolingRule(Enum):
    VOTE = "vote"
    AVERAGE_GRADIENT = "avg"
    POOLED_COEFFICIENTS = "pooled"


@dataclass(frozen=True)
class MigConfig:
    rule: PoolingRule = PoolingRule.AVERAGE_GRADIENT
    m: int = 5
    n_iter: int = 5
    cv_folds: int = 5
    grid_size: int = 100
    alpha: float = 0.05
    normalize: bool = False
    per_candidate_support: bool = False
    one_se: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.m < 2:
            raise ValueError("need M >= 2 imputations")


@dataclass(frozen=True)
class IterationRecord:
    active_before: tuple[int, ...]
    candidates: tuple[int, ...]
    support_size: int
    per_candidate_support: bool
    per_imp_gradients: np.ndarray | None
    pooled_gradients: np.ndarray | None
    votes: dict[int, int] | None
    chosen: int
    f_stat: float
    nu2: float
    p_value: float
    accepted: bool


@dataclass
class SelectionTrace:
    initial_lasso_set: tuple[int, ...]
    initial_pvalues: dict[int, float]
    initial_active: tuple[int, ...]
    records: list[IterationRecord] = field(default_factory=list)
    final_active: tuple[int, ...] = ()
    intercept: float = 0.0
    slopes: np.ndarray | None = None
    standard_errors: np.ndarray | None = None
    fmi: np.ndarray | None = None
    pooled_fit: PooledFit | None = None
    seconds: float = 0.0
    normalized: bool = False


def s_of_r(ds: Dataset, remaining) -> np.ndarray:
    """Rows fully observed on every remaining candidate column."""
    return rows_observed_on(ds, remaining)


def _sub_columns(imp: ImputedSet, cols: tuple[int, ...]) -> list[np.ndarray]:
    idx = [imp.cols.index(c) for c in cols]
    return [mat[:, idx] for mat in imp.matrices]


def _fit_models(imp: ImputedSet, cols: tuple[int, ...], y: np.ndarray) -> list[OlsFit]:
    if not cols:
        empty = np.empty((len(y), 0))
        fit = fit_ols(empty, y)
        return [fit] * imp.m
    return [fit_ols(sub, y) for sub in _sub_columns(imp, cols)]


def _per_imp_residuals(ds: Dataset, imp: ImputedSet, active: tuple[int, ...],
                       fits: list[OlsFit]) -> np.ndarray:
    """(M, n) residuals, each imputation using its own coefficients."""
    if not active:
        return np.stack([ds.y - f.coef[0] for f in fits])
    subs = _sub_columns(imp, active)
    return np.stack([ds.y - f.coef[0] - sub @ f.coef[1:] for f, sub in zip(fits, subs)])


def _pooled_residuals(ds: Dataset, imp: ImputedSet, active: tuple[int, ...],
                      fits: list[OlsFit]) -> np.ndarray:
    """Residuals at the Rubin-pooled fit: coefficient-times-imputed-value
    products are averaged across imputations."""
    beta0_bar = float(np.mean([f.coef[0] for f in fits]))
    if not active:
        return ds.y - beta0_bar
    subs = _sub_columns(imp, active)
    fitted = np.mean([sub @ f.coef[1:] for f, sub in zip(fits, subs)], axis=0)
    return ds.y - beta0_bar - fitted


def _gradient_table(ds: Dataset, residuals: np.ndarray, candidates: tuple[int, ...],
                    rows: np.ndarray, per_candidate: bool) -> np.ndarray:
    """Cross-products of candidate columns with residual rows.

    residuals has shape (..., n); output (..., len(candidates)). In
    per-candidate mode each candidate uses its own observed rows and
    sums are normalized by row count to stay comparable.
    """
    res = np.atleast_2d(residuals)
    out = np.empty((res.shape[0], len(candidates)))
    if not per_candidate:
        Xc = ds.X[np.ix_(rows, candidates)]
        out[:] = res[:, rows] @ Xc
    else:
        for c_idx, c in enumerate(candidates):
            rc = np.flatnonzero(~ds.mask[:, c])
            if rc.size == 0:
                out[:, c_idx] = 0.0
                continue
            out[:, c_idx] = (res[:, rc] @ ds.X[rc, c]) / rc.size
    return out if residuals.ndim > 1 else out[0]


def gradients_per_imputation(imp: ImputedSet, ds: Dataset, fits: list[OlsFit],
                             active: tuple[int, ...], candidates: tuple[int, ...],
                             rows: np.ndarray) -> np.ndarray:
    """(M, |candidates|) gradients, each imputation at its own fit."""
    if rows.size == 0:
        raise EmptySupportError("no rows observed on all candidates")
    res = _per_imp_residuals(ds, imp, active, fits)
    return _gradient_table(ds, res, candidates, rows, per_candidate=False)


def gradient_pooled(imp: ImputedSet, ds: Dataset, fits: list[OlsFit],
                    active: tuple[int, ...], candidates: tuple[int, ...],
                    rows: np.ndarray) -> np.ndarray:
    """|candidates| gradients at the Rubin-pooled fit."""
    if rows.size == 0:
        raise EmptySupportError("no rows observed on all candidates")
    res = _pooled_residuals(ds, imp, active, fits)
    return _gradient_table(ds, res, candidates, rows, per_candidate=False)


def select_next(rule: PoolingRule, per_imp: np.ndarray | None,
                pooled: np.ndarray | None, candidates: tuple[int, ...],
                rng: np.random.Generator) -> tuple[int, dict]:
    """Pick the next variable by |gradient| under the given rule.

    Vote ties are broken by a seeded uniform draw among the co-modal
    candidates (in ascending column order, so the draw is reproducible).
    """
    if not candidates:
        raise ValueError("no candidates")
    if rule is PoolingRule.VOTE:
        noms = np.argmax(np.abs(per_imp), axis=1)
        counts: dict[int, int] = {}
        for i in noms:
            c = candidates[int(i)]
            counts[c] = counts.get(c, 0) + 1
        top = max(counts.values())
        modes = sorted(c for c, v in counts.items() if v == top)
        chosen = modes[0] if len(modes) == 1 else int(rng.choice(modes))
        return chosen, {"votes": counts, "nominations": tuple(candidates[int(i)] for i in noms)}
    if rule is PoolingRule.AVERAGE_GRADIENT:
        means = per_imp.mean(axis=0)
        i = int(np.argmax(np.abs(means)))
        return candidates[i], {"mean_gradients": means}
    i = int(np.argmax(np.abs(pooled)))
    return candidates[i], {"pooled_gradients": pooled}


def _back_transform(trace: SelectionTrace, params) -> None:
    """Map standardized-scale estimates back to the original column scale."""
    sd = params.sd
    slopes = trace.slopes / sd
    intercept = trace.intercept - float((trace.slopes / sd) @ params.mean)
    trace.slopes = slopes
    trace.intercept = intercept
    if trace.standard_errors is not None:
        trace.standard_errors = trace.standard_errors / sd


def mig_run(ds: Dataset, cfg: MigConfig) -> SelectionTrace:
    """Run the full selection procedure and return its trace."""
    t_start = time.perf_counter()
    work = ds
    std_params = None
    if cfg.normalize:
        work, std_params = standardize(ds)

    cc = complete_cases(work)
    if cc.size == 0:
        raise InitializationError("no complete cases available for initialization")

    # Step 0: lasso on complete cases picks the imputation-model columns
    v0: tuple[int, ...] = ()
    if cc.size >= 3:
        folds = min(cfg.cv_folds, cc.size)
        if folds >= 2:
            _, fit0 = lasso_cv(work.X[cc], work.y[cc], folds=folds,
                               rng=substream(cfg.seed, "mig/init"),
                               grid_size=cfg.grid_size, one_se=cfg.one_se)
            v0 = tuple(int(j) for j in np.flatnonzero(fit0.slopes != 0.0))

    init_pvalues: dict[int, float] = {}
    active: tuple[int, ...] = ()
    imp: ImputedSet | None = None
    if v0:
        imp = mice_impute(work, v0, cfg.m, cfg.n_iter, substream(cfg.seed, "mig/impute", 0))
        fits_v0 = _fit_models(imp, v0, work.y)
        pf0 = pool_ols(fits_v0)
        for local, v in enumerate(v0):
            _, _, p, sig = pooled_t_test(pf0, local + 1, cfg.alpha)
            init_pvalues[v] = p
        active = tuple(v for v in v0 if init_pvalues[v] < cfg.alpha)

    trace = SelectionTrace(initial_lasso_set=v0, initial_pvalues=init_pvalues,
                           initial_active=active, normalized=cfg.normalize)

    if active:
        fits = _fit_models(imp, active, work.y)
    else:
        fits = _fit_models_intercept(work.y, cfg.m)
    pf = pool_ols(fits)

    tie_rng = substream(cfg.seed, "mig/ties")
    iteration = 0
    while True:
        candidates = tuple(c for c in range(work.p) if c not in active)
        if not candidates:
            break
        if work.n <= len(active) + 3:
            break  # cannot fit the enlarged model

        rows = s_of_r(work, candidates)
        per_cand = cfg.per_candidate_support or rows.size == 0
        if active:
            res_per = _per_imp_residuals(work, imp, active, fits)
            res_pool = _pooled_residuals(work, imp, active, fits)
        else:
            res_per = np.stack([work.y - f.coef[0] for f in fits])
            res_pool = work.y - float(np.mean([f.coef[0] for f in fits]))
        per_imp_g = _gradient_table(work, res_per, candidates, rows, per_cand)
        pooled_g = _gradient_table(work, res_pool, candidates, rows, per_cand)

        chosen, _diag = select_next(cfg.rule, per_imp_g, pooled_g, candidates, tie_rng)
        votes = _diag.get("votes")

        v_next = tuple(sorted(active + (chosen,)))
        iteration += 1
        imp_next = mice_impute(work, v_next, cfg.m, cfg.n_iter,
                               substream(cfg.seed, "mig/impute", iteration))
        fits_h0 = _fit_models(imp_next, active, work.y)
        fits_ha = _fit_models(imp_next, v_next, work.y)
        ftest = pooled_f_test_change_r2(fits_h0, fits_ha, work.n)
        accepted = ftest.p_value < cfg.alpha

        trace.records.append(IterationRecord(
            active_before=active, candidates=candidates, support_size=int(rows.size),
            per_candidate_support=per_cand, per_imp_gradients=per_imp_g,
            pooled_gradients=pooled_g, votes=votes, chosen=chosen,
            f_stat=ftest.f_stat, nu2=ftest.nu2, p_value=ftest.p_value,
            accepted=accepted))

        if not accepted:
            break
        active = v_next
        imp = imp_next
        fits = fits_ha
        pf = pool_ols(fits)

    trace.final_active = active
    slopes = np.zeros(work.p)
    ses = np.zeros(work.p)
    fmi = np.zeros(work.p)
    for local, v in enumerate(active):
        slopes[v] = pf.beta_bar[local + 1]
        ses[v] = np.sqrt(max(pf.total[local + 1, local + 1], 0.0))
        fmi[v] = pf.fmi[local + 1]
    trace.intercept = float(pf.beta_bar[0])
    trace.slopes = slopes
    trace.standard_errors = ses
    trace.fmi = fmi
    trace.pooled_fit = pf
    if std_params is not None:
        _back_transform(trace, std_params)
    trace.seconds = time.perf_counter() - t_start
    return trace


def _fit_models_intercept(y: np.ndarray, m: int) -> list[OlsFit]:
    fit = fit_ols(np.empty((len(y), 0)), y)
    return [fit] * m
