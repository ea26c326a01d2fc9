"""Simulation benchmark: data generator, metrics, and replicate runner.

Training data get missing values from three logistic (MAR) column rules
plus MCAR masking calibrated so the overall missing fraction hits a
target; a seeded quarter of the rows is kept fully observed. Methods
are scored on selection counts, MCC, coefficient error norms, and mean
squared prediction error on a complete held-out test set.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines
from .baselines import BaselineResult, MethodInfeasibleError
from .data import Dataset
from .mig import MigConfig, PoolingRule, mig_run
from .pooling import refit_fmi
from .rng import substream, substream_seq

ACTIVE_BETAS = (1.0, 2.0, 3.0, 4.0, 5.0, -1.0, -2.0, -3.0, -4.0, -5.0)
MAR_COLUMNS = (2, 4, 9)   # 0-based; never-masked driver columns are 0 and 5
NEVER_MASKED = (0, 5)
PROTECT_FRACTION = 0.25

METHOD_NAMES = ("ldls", "mils", "ld_lasso_cv", "mi_lasso_s1", "mi_lasso_s2",
                "mi_lasso_s3", "mi_stacked", "mig1", "mig2", "mig3")

METRIC_ORDER = ("l1", "l2", "mspe", "tp", "tn", "fp", "fn", "mcc", "seconds")


@dataclass(frozen=True)
class SimConfig:
    p: int = 35
    rho: float = 0.2
    miss_pct: float = 0.01
    n_train: int = 200
    n_test: int = 200
    m: int = 5
    folds: int = 10
    mig_cv_folds: int = 5
    alpha: float = 0.05
    replicates: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.p < 10:
            raise ValueError("need p >= 10 (ten active variables)")
        if not 0.0 <= self.miss_pct < 1.0:
            raise ValueError("miss_pct must be in [0, 1)")

    def beta_true(self) -> np.ndarray:
        beta = np.zeros(self.p)
        beta[: len(ACTIVE_BETAS)] = ACTIVE_BETAS
        return beta


@dataclass(frozen=True)
class MetricsRow:
    tp: int
    tn: int
    fp: int
    fn: int
    mcc: float
    l1: float
    l2: float
    mspe: float
    seconds: float
    mcc_degenerate: bool = False
    feasible: bool = True

    def as_dict(self) -> dict[str, float]:
        return {"l1": self.l1, "l2": self.l2, "mspe": self.mspe,
                "tp": float(self.tp), "tn": float(self.tn), "fp": float(self.fp),
                "fn": float(self.fn), "mcc": self.mcc, "seconds": self.seconds}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def generate_dataset(cfg: SimConfig, rng: np.random.Generator
                     ) -> tuple[Dataset, Dataset, np.ndarray]:
    """One (train with mask, complete test, beta_true) triple."""
    n = cfg.n_train + cfg.n_test
    p = cfg.p
    shared = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, p))
    X = math.sqrt(cfg.rho) * shared + math.sqrt(1.0 - cfg.rho) * own
    beta = cfg.beta_true()
    y = X @ beta + rng.standard_normal(n)

    Xtr, ytr = X[: cfg.n_train], y[: cfg.n_train]
    Xte, yte = X[cfg.n_train:], y[cfg.n_train:]
    names = tuple(f"x{j + 1}" for j in range(p))

    mask = np.zeros((cfg.n_train, p), dtype=bool)
    target = int(round(cfg.miss_pct * cfg.n_train * p))
    if target > 0:
        x1, x6 = Xtr[:, 0], Xtr[:, 5]
        probs = np.column_stack([
            _sigmoid(x6 - 2.5),          # column x3
            _sigmoid(x1 + x6 - 2.0),     # column x5
            _sigmoid(-x1 - 0.5 * x6 - 2.0),  # column x10
        ])
        draws = rng.random(probs.shape)
        for k, col in enumerate(MAR_COLUMNS):
            mask[:, col] = draws[:, k] < probs[:, k]

        n_protect = int(round(PROTECT_FRACTION * cfg.n_train))
        protected = rng.choice(cfg.n_train, size=n_protect, replace=False)
        mask[protected] = False

        realized = int(mask.sum())
        remaining = target - realized
        if remaining < 0:
            warnings.warn(
                f"MAR masking alone ({realized} cells) exceeds the target "
                f"({target}); realized missing fraction is "
                f"{realized / (cfg.n_train * p):.4f}", stacklevel=2)
        elif remaining > 0:
            mcar_cols = np.array([j for j in range(p)
                                  if j not in MAR_COLUMNS and j not in NEVER_MASKED])
            unprotected = np.setdiff1d(np.arange(cfg.n_train), protected)
            eligible = np.array([(i, j) for i in unprotected for j in mcar_cols
                                 if not mask[i, j]])
            take = min(remaining, len(eligible))
            if take < remaining:
                warnings.warn("missingness target unreachable with eligible cells",
                              stacklevel=2)
            picked = eligible[rng.choice(len(eligible), size=take, replace=False)]
            mask[picked[:, 0], picked[:, 1]] = True

    train = Dataset(y=ytr, X=Xtr, mask=mask, names=names)
    test = Dataset(y=yte, X=Xte, mask=np.zeros_like(Xte, dtype=bool), names=names)
    return train, test, beta


def compute_metrics(beta_true: np.ndarray, intercept: float, coef: np.ndarray,
                    test: Dataset, seconds: float = 0.0) -> MetricsRow:
    """Selection counts, MCC, coefficient errors, and test-set MSPE."""
    true_active = beta_true != 0.0
    picked = coef != 0.0
    tp = int(np.sum(picked & true_active))
    tn = int(np.sum(~picked & ~true_active))
    fp = int(np.sum(picked & ~true_active))
    fn = int(np.sum(~picked & true_active))
    denom = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    degenerate = denom == 0.0
    mcc = 0.0 if degenerate else (tp * tn - fp * fn) / denom
    diff = coef - beta_true
    pred = intercept + test.X @ coef
    mspe = float(np.mean((test.y - pred) ** 2))
    return MetricsRow(tp=tp, tn=tn, fp=fp, fn=fn, mcc=float(mcc),
                      l1=float(np.abs(diff).sum()), l2=float(np.linalg.norm(diff)),
                      mspe=mspe, seconds=seconds, mcc_degenerate=degenerate)


def _method_seed(master_seed: int, method: str, rep: int) -> int:
    return int(substream_seq(master_seed, f"method/{method}", rep).generate_state(1)[0])


_MIG_RULES = {"mig1": PoolingRule.VOTE, "mig2": PoolingRule.AVERAGE_GRADIENT,
              "mig3": PoolingRule.POOLED_COEFFICIENTS}


def run_method(name: str, ds: Dataset, cfg: SimConfig, rep: int) -> BaselineResult:
    """Run one selector on a training set with its derived substream."""
    if name not in METHOD_NAMES:
        raise ValueError(f"unknown method {name!r}; valid: {', '.join(METHOD_NAMES)}")
    rng = substream(cfg.seed, f"method/{name}", rep)
    if name == "ldls":
        return baselines.ldls(ds, alpha=cfg.alpha)
    if name == "mils":
        return baselines.mils(ds, m=cfg.m, alpha=cfg.alpha, rng=rng)
    if name == "ld_lasso_cv":
        return baselines.ld_lasso_cv(ds, folds=cfg.folds, rng=rng)
    if name.startswith("mi_lasso_s"):
        mode = {"mi_lasso_s1": "any", "mi_lasso_s2": "half", "mi_lasso_s3": "all"}[name]
        return baselines.mi_lasso_separate(ds, m=cfg.m, folds=cfg.folds, mode=mode, rng=rng)
    if name == "mi_stacked":
        return baselines.mi_stacked(ds, m=cfg.m, folds=cfg.folds, rng=rng)
    mig_cfg = MigConfig(rule=_MIG_RULES[name], m=cfg.m, cv_folds=cfg.mig_cv_folds,
                        alpha=cfg.alpha, seed=_method_seed(cfg.seed, name, rep))
    trace = mig_run(ds, mig_cfg)
    return BaselineResult(method=name, selected=trace.final_active,
                          intercept=trace.intercept, coef=trace.slopes,
                          seconds=trace.seconds)


def _run_replicate(cfg: SimConfig, methods: tuple[str, ...], rep: int
                   ) -> dict[str, MetricsRow]:
    train, test, beta = generate_dataset(cfg, substream(cfg.seed, "sim/data", rep))
    rows: dict[str, MetricsRow] = {}
    for name in methods:
        try:
            res = run_method(name, train, cfg, rep)
        except (MethodInfeasibleError, ValueError):
            rows[name] = MetricsRow(tp=0, tn=0, fp=0, fn=0, mcc=float("nan"),
                                    l1=float("nan"), l2=float("nan"),
                                    mspe=float("nan"), seconds=float("nan"),
                                    feasible=False)
            continue
        rows[name] = compute_metrics(beta, res.intercept, res.coef, test, res.seconds)
    return rows


@dataclass
class MetricsReport:
    """Per-method mean/sd over replicates, plus feasibility counts."""

    config: SimConfig
    methods: tuple[str, ...]
    rows: list[dict[str, MetricsRow]] = field(default_factory=list)

    def aggregate(self) -> dict[str, dict[str, tuple[float, float]]]:
        out: dict[str, dict[str, tuple[float, float]]] = {}
        for name in self.methods:
            feas = [r[name] for r in self.rows if r[name].feasible]
            stats: dict[str, tuple[float, float]] = {}
            for metric in METRIC_ORDER:
                vals = np.array([row.as_dict()[metric] for row in feas])
                if vals.size == 0:
                    stats[metric] = (float("nan"), float("nan"))
                else:
                    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
                    stats[metric] = (float(vals.mean()), sd)
            stats["n_feasible"] = (float(len(feas)), 0.0)
            out[name] = stats
        return out


def run_benchmark(cfg: SimConfig, methods, jobs: int = 1) -> MetricsReport:
    """Run every method on `cfg.replicates` seeded replicates.

    Results are identical for any `jobs`: each replicate draws from a
    substream derived from its index and rows are combined in replicate
    order.
    """
    methods = tuple(methods)
    if not methods:
        raise ValueError("need at least one method")
    for name in methods:
        if name not in METHOD_NAMES:
            raise ValueError(f"unknown method {name!r}; valid: {', '.join(METHOD_NAMES)}")
    report = MetricsReport(config=cfg, methods=methods)
    reps = range(cfg.replicates)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            report.rows = list(pool.map(_replicate_star,
                                        [(cfg, methods, r) for r in reps]))
    else:
        report.rows = [_run_replicate(cfg, methods, r) for r in reps]
    return report


def _replicate_star(args) -> dict[str, MetricsRow]:
    return _run_replicate(*args)


def refit_study(cfg: SimConfig, methods, jobs: int = 1) -> dict[str, tuple[float, int]]:
    """Mean refit fmi per method over replicates (MI with M=5 refits).

    Replicates where a method selects nothing, or is infeasible, count
    as missing for that method.
    """
    methods = tuple(methods)
    phis: dict[str, list[float]] = {name: [] for name in methods}
    reps = range(cfg.replicates)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_refit_star, [(cfg, methods, r) for r in reps]))
    else:
        results = [_refit_replicate(cfg, methods, r) for r in reps]
    for rep_result in results:
        for name, phi in rep_result.items():
            if not math.isnan(phi):
                phis[name].append(phi)
    return {name: (float(np.mean(v)) if v else float("nan"), len(v))
            for name, v in phis.items()}


def _refit_replicate(cfg: SimConfig, methods: tuple[str, ...], rep: int
                     ) -> dict[str, float]:
    train, _test, _beta = generate_dataset(cfg, substream(cfg.seed, "sim/data", rep))
    out: dict[str, float] = {}
    for name in methods:
        try:
            res = run_method(name, train, cfg, rep)
            if not res.selected:
                out[name] = float("nan")
                continue
            rf = refit_fmi(train, res.selected, m=5,
                           rng=substream(cfg.seed, f"refit/{name}", rep))
            out[name] = rf.phi_selected
        except (MethodInfeasibleError, ValueError):
            out[name] = float("nan")
    return out


def _refit_star(args) -> dict[str, float]:
    return _refit_replicate(*args)
