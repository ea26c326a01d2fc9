"""Command-line interface: simulate / select / bench / refit.

Exit codes: 0 success, 2 input or configuration error, 3 data-contract
violation, 4 method infeasibility, 5 internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines
from .baselines import MethodInfeasibleError
from .data import Dataset
from .mig import MigConfig, PoolingRule, mig_run
from .ols import SingularDesignError
from .pooling import refit_fmi
from .rng import substream, substream_seq
from .simbench import (METHOD_NAMES, METRIC_ORDER, MetricsReport, SimConfig,
                       generate_dataset, refit_study, run_benchmark)

EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4
EXIT_NUMERICAL = 5

MISSING_TOKENS = ("", "NA")

RULE_TO_METHOD = {"vote": "mig1", "avg": "mig2", "pooled": "mig3"}


class InputError(Exception):
    """Unparseable input or configuration (exit 2)."""


class DataContractError(Exception):
    """Input violates a data contract, e.g. missing response (exit 3)."""


# ---------------------------------------------------------------------------
# CSV and config-file handling

def read_csv_dataset(path: str, response: str) -> Dataset:
    """Read a CSV with a header row; empty fields and literal NA are missing."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty file") from None
            rows = [(reader.line_num, row) for row in reader]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    if response not in header:
        raise InputError(f"{path}: response column {response!r} not in header")
    resp_idx = header.index(response)

    values = np.full((len(rows), len(header)), np.nan)
    mask = np.zeros_like(values, dtype=bool)
    for i, (line_num, row) in enumerate(rows):
        if len(row) != len(header):
            raise InputError(f"{path}: line {line_num}: expected "
                             f"{len(header)} fields, got {len(row)}")
        for j, tok in enumerate(row):
            tok = tok.strip()
            if tok in MISSING_TOKENS:
                mask[i, j] = True
                continue
            try:
                values[i, j] = float(tok)
            except ValueError:
                raise InputError(f"{path}: line {line_num}, column "
                                 f"{header[j]!r}: cannot parse {tok!r}") from None

    if mask[:, resp_idx].any():
        bad = int(np.flatnonzero(mask[:, resp_idx])[0]) + 2
        raise DataContractError(f"{path}: response {response!r} has a missing "
                                f"value (first at line {bad})")
    keep = [j for j in range(len(header)) if j != resp_idx]
    return Dataset(y=values[:, resp_idx], X=values[:, keep], mask=mask[:, keep],
                   names=tuple(header[j] for j in keep))


def read_config(path: str) -> dict[str, str]:
    """Flat key = value text config; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {ln}: expected key = value")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def write_snapshot(out_dir: Path, resolved: dict) -> None:
    lines = [f"{k} = {resolved[k]}" for k in sorted(resolved)]
    (out_dir / "resolved_config.txt").write_text("\n".join(lines) + "\n")


def fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.6f}"


# ---------------------------------------------------------------------------
# Subcommands

def _scenario_configs(conf: dict[str, str], args) -> list[SimConfig]:
    def many(key, default, cast=float):
        raw = conf.get(key, default)
        return [cast(tok) for tok in str(raw).split(",") if tok.strip() != ""]

    seed = int(conf.get("seed", args.seed))
    cfgs = []
    for p in many("p", "35", int):
        for rho in many("rho", "0.2"):
            for miss in many("miss_pct", "0.01"):
                cfgs.append(SimConfig(
                    p=p, rho=rho, miss_pct=miss,
                    n_train=int(conf.get("n_train", 200)),
                    n_test=int(conf.get("n_test", 200)),
                    m=int(conf.get("m", args.m_imputations)),
                    folds=int(conf.get("folds", 10)),
                    mig_cv_folds=int(conf.get("mig_cv_folds", args.cv_folds)),
                    alpha=float(conf.get("alpha", args.alpha)),
                    replicates=int(conf.get("replicates", 20)),
                    seed=seed))
    return cfgs


def _bench_methods(conf: dict[str, str]) -> tuple[str, ...]:
    methods = tuple(t.strip() for t in conf.get("methods", "mig2").split(",") if t.strip())
    for name in methods:
        if name not in METHOD_NAMES:
            raise InputError(f"unknown method {name!r}; valid: {', '.join(METHOD_NAMES)}")
    return methods


def cmd_bench(args) -> int:
    conf = read_config(args.config) if args.config else {}
    methods = _bench_methods(conf)
    cfgs = _scenario_configs(conf, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports: list[MetricsReport] = []
    for cfg in cfgs:
        reports.append(run_benchmark(cfg, methods, jobs=args.jobs))

    det_metrics = [mname for mname in METRIC_ORDER if mname != "seconds"]
    bench_lines = ["scenario_p,scenario_rho,scenario_miss_pct,method,n_feasible,"
                   + ",".join(f"{mx}_{s}" for mx in det_metrics for s in ("mean", "sd"))]
    timing_lines = ["scenario_p,scenario_rho,scenario_miss_pct,method,"
                    "seconds_mean,seconds_sd"]
    text_lines = []
    for cfg, report in zip(cfgs, reports):
        agg = report.aggregate()
        text_lines.append(f"scenario: p={cfg.p} rho={cfg.rho} miss_pct={cfg.miss_pct} "
                          f"replicates={cfg.replicates}")
        hdr = f"{'method':<14}" + "".join(f"{mx:>16}" for mx in det_metrics)
        text_lines.append(hdr)
        for name in methods:
            stats = agg[name]
            key = f"{cfg.p},{cfg.rho},{cfg.miss_pct},{name}"
            cells = []
            for mx in det_metrics:
                mean, sd = stats[mx]
                cells += [fmt(mean), fmt(sd)]
            bench_lines.append(f"{key},{int(stats['n_feasible'][0])}," + ",".join(cells))
            ts_mean, ts_sd = stats["seconds"]
            timing_lines.append(f"{key},{fmt(ts_mean)},{fmt(ts_sd)}")
            row = f"{name:<14}"
            for mx in det_metrics:
                mean, _ = stats[mx]
                row += f"{fmt(mean):>16}"
            text_lines.append(row)
        text_lines.append("")

    (out_dir / "bench.csv").write_text("\n".join(bench_lines) + "\n")
    (out_dir / "timing.csv").write_text("\n".join(timing_lines) + "\n")
    (out_dir / "bench.txt").write_text("\n".join(text_lines) + "\n")
    resolved = dict(conf)
    resolved.update({"methods": ",".join(methods), "jobs": args.jobs,
                     "seed": cfgs[0].seed, "command": "bench"})
    write_snapshot(out_dir, resolved)
    return 0


def cmd_simulate(args) -> int:
    conf = read_config(args.config) if args.config else {}
    cfgs = _scenario_configs(conf, args)
    if len(cfgs) != 1:
        raise InputError("simulate expects a single scenario (no value lists)")
    cfg = cfgs[0]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test, beta = generate_dataset(cfg, substream(cfg.seed, "sim/data", 0))

    def write_ds(ds: Dataset, path: Path):
        lines = ["y," + ",".join(ds.names)]
        for i in range(ds.n):
            cells = [f"{ds.y[i]:.10g}"]
            for j in range(ds.p):
                cells.append("" if ds.mask[i, j] else f"{ds.X[i, j]:.10g}")
            lines.append(",".join(cells))
        path.write_text("\n".join(lines) + "\n")

    write_ds(train, out_dir / "train.csv")
    write_ds(test, out_dir / "test.csv")
    truth = ["variable,beta"] + [f"{n},{b:.10g}" for n, b in zip(train.names, beta)]
    (out_dir / "truth.csv").write_text("\n".join(truth) + "\n")
    resolved = dict(conf)
    resolved.update({"seed": cfg.seed, "command": "simulate",
                     "realized_missing_cells": int(train.mask.sum())})
    write_snapshot(out_dir, resolved)
    return 0


def _resolve_method(args) -> str:
    name = args.method
    if name == "mig":
        name = RULE_TO_METHOD[args.rule]
    if name not in METHOD_NAMES:
        raise InputError(f"unknown method {name!r}; valid: "
                         f"{', '.join(METHOD_NAMES + ('mig',))}")
    return name


def cmd_select(args) -> int:
    method = _resolve_method(args)
    ds = read_csv_dataset(args.csv, args.response)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trace = None
    if method.startswith("mig"):
        rule = {"mig1": PoolingRule.VOTE, "mig2": PoolingRule.AVERAGE_GRADIENT,
                "mig3": PoolingRule.POOLED_COEFFICIENTS}[method]
        mig_cfg = MigConfig(rule=rule, m=args.m_imputations, cv_folds=args.cv_folds,
                            alpha=args.alpha, normalize=args.normalize,
                            seed=int(substream_seq(args.seed, "select/mig").generate_state(1)[0]))
        trace = mig_run(ds, mig_cfg)
        selected, intercept, coef = trace.final_active, trace.intercept, trace.slopes
        ses, fmi = trace.standard_errors, trace.fmi
    else:
        rng = substream(args.seed, f"select/{method}")
        if method == "ldls":
            res = baselines.ldls(ds, alpha=args.alpha)
        elif method == "mils":
            res = baselines.mils(ds, m=args.m_imputations, alpha=args.alpha, rng=rng)
        elif method == "ld_lasso_cv":
            res = baselines.ld_lasso_cv(ds, folds=args.cv_folds, rng=rng)
        elif method.startswith("mi_lasso_s"):
            mode = {"mi_lasso_s1": "any", "mi_lasso_s2": "half", "mi_lasso_s3": "all"}[method]
            res = baselines.mi_lasso_separate(ds, m=args.m_imputations,
                                              folds=args.cv_folds, mode=mode, rng=rng)
        else:
            res = baselines.mi_stacked(ds, m=args.m_imputations,
                                       folds=args.cv_folds, rng=rng)
        selected, intercept, coef = res.selected, res.intercept, res.coef
        ses = fmi = None

    lines = ["variable,selected,coefficient,se,fmi"]
    for j, name in enumerate(ds.names):
        sel = int(j in selected)
        se_s = fmt(float(ses[j])) if ses is not None and sel else "NA"
        fmi_s = fmt(float(fmi[j])) if fmi is not None and sel else "NA"
        lines.append(f"{name},{sel},{fmt(float(coef[j]))},{se_s},{fmi_s}")
    lines.append(f"(intercept),1,{fmt(float(intercept))},NA,NA")
    (out_dir / "selection.csv").write_text("\n".join(lines) + "\n")

    summary = [f"method: {method}", f"selected: "
               f"{', '.join(ds.names[j] for j in selected) if selected else '(none)'}"]
    if selected and ds.mask.any():
        rf = refit_fmi(ds, selected, m=args.m_imputations,
                       rng=substream(args.seed, "select/refit"))
        summary.append(f"refit fmi: {fmt(rf.phi_selected)}")
        summary.append(f"refit fmi ratio vs full model: {fmt(rf.ratio)}"
                       + (" (full-model fmi is zero)" if rf.full_model_zero else ""))
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")

    if trace is not None:
        (out_dir / "trace.txt").write_text(format_trace(trace, ds.names) + "\n")
    write_snapshot(out_dir, {"command": "select", "csv": args.csv,
                             "response": args.response, "method": method,
                             "seed": args.seed, "alpha": args.alpha,
                             "m_imputations": args.m_imputations,
                             "cv_folds": args.cv_folds,
                             "normalize": args.normalize})
    return 0


def format_trace(trace, names) -> str:
    def label(js):
        return ", ".join(names[j] for j in js) if js else "(none)"

    out = [f"initial lasso set: {label(trace.initial_lasso_set)}",
           "initial pooled t p-values: "
           + (", ".join(f"{names[v]}={p:.4f}" for v, p in trace.initial_pvalues.items())
              or "(none)"),
           f"initial active set: {label(trace.initial_active)}"]
    for i, rec in enumerate(trace.records, start=1):
        out.append(f"iteration {i}: active={label(rec.active_before)} "
                   f"support={rec.support_size} chosen={names[rec.chosen]} "
                   f"F={rec.f_stat:.4f} nu2={rec.nu2:.2f} p={rec.p_value:.4g} "
                   f"{'accepted' if rec.accepted else 'rejected (stop)'}")
        if rec.votes is not None:
            out.append("  votes: " + ", ".join(f"{names[c]}:{v}"
                                               for c, v in sorted(rec.votes.items())))
    out.append(f"final active set: {label(trace.final_active)}")
    out.append(f"elapsed seconds: {trace.seconds:.3f}")
    return "\n".join(out)


def cmd_refit(args) -> int:
    ds = read_csv_dataset(args.csv, args.response)
    name_to_idx = {n: j for j, n in enumerate(ds.names)}
    cols = []
    for tok in args.cols.split(","):
        tok = tok.strip()
        if tok not in name_to_idx:
            raise InputError(f"unknown column {tok!r}")
        cols.append(name_to_idx[tok])
    rf = refit_fmi(ds, cols, m=args.m_imputations,
                   rng=substream(args.seed, "refit/cli"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "refit.csv").write_text(
        "phi_selected,phi_full,ratio,full_model_zero\n"
        f"{fmt(rf.phi_selected)},{fmt(rf.phi_full)},{fmt(rf.ratio)},"
        f"{int(rf.full_model_zero)}\n")
    write_snapshot(out_dir, {"command": "refit", "csv": args.csv,
                             "response": args.response, "cols": args.cols,
                             "seed": args.seed,
                             "m_imputations": args.m_imputations})
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="migselect",
                                     description="Variable selection for linear "
                                     "regression with missing covariates")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default="out")
        p.add_argument("--m-imputations", type=int, default=5)
        p.add_argument("--cv-folds", type=int, default=5)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--print-config", action="store_true",
                       help="print resolved configuration and exit")

    p_sim = sub.add_parser("simulate", help="export one simulated scenario")
    p_sim.add_argument("--config", default=None)
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sel = sub.add_parser("select", help="run one selector on a CSV")
    p_sel.add_argument("csv")
    p_sel.add_argument("--response", required=True)
    p_sel.add_argument("--method", default="mig")
    p_sel.add_argument("--rule", choices=("vote", "avg", "pooled"), default="avg")
    p_sel.add_argument("--normalize", action="store_true")
    common(p_sel)
    p_sel.set_defaults(func=cmd_select)

    p_bench = sub.add_parser("bench", help="run the simulation benchmark")
    p_bench.add_argument("--config", required=True)
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_refit = sub.add_parser("refit", help="fmi of refitting a column subset")
    p_refit.add_argument("csv")
    p_refit.add_argument("--response", required=True)
    p_refit.add_argument("--cols", required=True,
                         help="comma-separated selected column names")
    common(p_refit)
    p_refit.set_defaults(func=cmd_refit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "print_config", False):
        resolved = {k: v for k, v in sorted(vars(args).items())
                    if k not in ("func", "print_config")}
        for k, v in resolved.items():
            print(f"{k} = {v}")
        return 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DataContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MethodInfeasibleError as exc:
        print(f"error: method infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularDesignError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
