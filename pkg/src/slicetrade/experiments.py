"""Experiment harness: convergence comparison, bandwidth sweep, population sweeps.

Each experiment returns an :class:`ExperimentReport` holding a flat table and
named boolean checks. Tables are written with :func:`emit_csv`; per-run
histories go under ``<out>/runs`` so every reported number can be traced back
to the (run, iteration) rows it averages.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .trainer import COST_MADDPG, RANDOM, SA_DDPG, ST_MADDPG, TrainingHistory, train

CONVERGENCE_COLUMNS = ["algorithm", "window", "iter_start", "iter_end", "mean_system_utility",
                       "normalized_system_utility", "config_hash"]
SWEEP_COLUMNS = ["algorithm", "axis", "value", "mean_price", "mean_quantity",
                 "mean_seller_utility", "total_seller_utility", "total_buyer_utility",
                 "config_hash"]


@dataclass
class ExperimentReport:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(self.checks.values())

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        lines += [f"  {'ok  ' if v else 'FAIL'} {k}" for k, v in self.checks.items()]
        lines += [f"  error {e}" for e in self.errors]
        return "\n".join(lines)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def emit_csv(report: ExperimentReport, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_fmt(row[c]) for c in report.columns])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def window_means(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n = len(values) // window
    return values[: n * window].reshape(n, window).mean(axis=1) if n else np.zeros(0)


def non_increasing(xs) -> bool:
    return all(b <= a for a, b in zip(xs, xs[1:]))


def non_decreasing(xs) -> bool:
    return all(b >= a for a, b in zip(xs, xs[1:]))


def trend_ci(y, level=0.95):
    """Least-squares slope over the index and its two-sided confidence interval."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        return 0.0, (-np.inf, np.inf)
    fit = stats.linregress(np.arange(len(y)), y)
    half = stats.t.ppf(0.5 + level / 2, len(y) - 2) * fit.stderr
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))


@dataclass
class _Runner:
    out: Path | None
    se_gap: bool = False
    log: Callable | None = None

    def run(self, alg, cfg, seed, tag=""):
        h = train(alg, cfg, seed, se_gap=self.se_gap)
        if self.out is not None:
            h.write(self.out / "runs" / f"{tag}{alg}_seed{seed}.csv")
        if self.log:
            extra = f" aborted: {h.aborted}" if h.aborted else ""
            self.log(f"{tag}{alg} seed {seed}: {len(h)} iterations in {h.wall_time_s:.1f}s{extra}")
        if h.aborted:
            raise RuntimeError(f"{tag}{alg} seed {seed}: {h.aborted}")
        return h


# -- convergence -----------------------------------------------------------

def run_convergence(cfg: ExperimentConfig, out=None, log=None, algorithms=None,
                    plateau_by: int = 1000, plateau_frac: float = 0.95) -> ExperimentReport:
    """All algorithms over all seeds; windowed mean system utility, jointly normalized."""
    algorithms = list(algorithms or cfg.algorithms)
    runner = _Runner(Path(out) if out else None, log=log)
    rep = ExperimentReport("converge", CONVERGENCE_COLUMNS)
    curves = {}
    for alg in algorithms:
        per_seed = []
        for seed in cfg.seeds:
            try:
                per_seed.append(window_means(runner.run(alg, cfg, seed).system_utility, cfg.window))
            except Exception as exc:  # keep going with the other algorithms
                rep.errors.append(str(exc))
        if per_seed:
            curves[alg] = np.mean(per_seed, axis=0)
    if not curves:
        return rep
    allv = np.concatenate(list(curves.values()))
    lo, hi = float(allv.min()), float(allv.max())
    span = hi - lo if hi > lo else 1.0
    norm = {a: (c - lo) / span for a, c in curves.items()}
    digest = cfg.digest()
    for alg, c in curves.items():
        for k, v in enumerate(c):
            rep.rows.append(dict(algorithm=alg, window=k, iter_start=k * cfg.window,
                                 iter_end=(k + 1) * cfg.window - 1, mean_system_utility=float(v),
                                 normalized_system_utility=float(norm[alg][k]), config_hash=digest))
    order = [a for a in (COST_MADDPG, ST_MADDPG, SA_DDPG, RANDOM) if a in norm]
    finals = [norm[a][-1] for a in order]
    rep.checks["final-window ordering " + " > ".join(order)] = all(
        a > b for a, b in zip(finals, finals[1:]))
    if COST_MADDPG in norm:
        c = norm[COST_MADDPG]
        plateau = c[-1]
        k_max = plateau_by // cfg.window
        early = c[:k_max]
        rep.checks[f"{COST_MADDPG} reaches {plateau_frac:.0%} of plateau by iteration {plateau_by}"] = (
            bool(len(early)) and bool(np.any(early >= plateau_frac * plateau)))
    rep.curves = curves
    rep.normalized = norm
    if RANDOM in curves:
        rep.random_trend = trend_ci(curves[RANDOM])
    return rep


# -- sweeps ----------------------------------------------------------------

def bandwidth_cell(cfg: ExperimentConfig, bandwidth_hz: float) -> ExperimentConfig:
    """Same PRB width, more or fewer PRBs."""
    prbs = int(round(bandwidth_hz / cfg.prb_bandwidth_hz))
    return cfg.replace(system_bandwidth_hz=float(bandwidth_hz), num_prbs=prbs)


def _cell_stats(hists: list, window: int) -> dict:
    def tail(x):
        return np.asarray(x, dtype=float)[-window:]

    M = hists[0].num_sellers
    return dict(
        mean_price=float(np.mean([tail(h.array("prices")).mean() for h in hists])),
        mean_quantity=float(np.mean([tail(h.array("quantities").sum(axis=1)).mean() for h in hists])),
        mean_seller_utility=float(np.mean([tail(h.seller_utility).mean() for h in hists]) / M),
        total_seller_utility=float(np.mean([tail(h.seller_utility).mean() for h in hists])),
        total_buyer_utility=float(np.mean([tail(h.buyer_utility).mean() for h in hists])),
    )


def _sweep(cfg, axis, values, make_cell, algorithms, out, log, name):
    runner = _Runner(Path(out) if out else None, log=log)
    rep = ExperimentReport(name, SWEEP_COLUMNS)
    table = {}
    for alg in algorithms:
        for v in values:
            cell = make_cell(v)
            hists = []
            for seed in cfg.seeds:
                try:
                    hists.append(runner.run(alg, cell, seed, tag=f"{axis}{v:g}_"))
                except Exception as exc:
                    rep.errors.append(str(exc))
            if not hists:
                continue
            st = _cell_stats(hists, cfg.window)
            table[alg, v] = st
            rep.rows.append(dict(algorithm=alg, axis=axis, value=v, config_hash=cell.digest(), **st))
    rep.table = table
    return rep


def run_pricing_sweep(cfg: ExperimentConfig, values=None, out=None, log=None,
                      algorithms=(COST_MADDPG, ST_MADDPG)) -> ExperimentReport:
    values = list(values if values is not None else (cfg.sweep_values or [5e6, 10e6, 20e6]))
    values = [float(v) for v in values]
    rep = _sweep(cfg, "bandwidth_hz", values, lambda v: bandwidth_cell(cfg, v), algorithms,
                 out, log, "sweep-bandwidth")
    if len(values) >= 2:
        for alg in algorithms:
            cells = [rep.table.get((alg, v)) for v in values]
            if any(c is None for c in cells):
                continue
            rep.checks[f"{alg} price non-increasing in bandwidth"] = non_increasing(
                [c["mean_price"] for c in cells])
            rep.checks[f"{alg} quantity non-decreasing in bandwidth"] = non_decreasing(
                [c["mean_quantity"] for c in cells])
    return rep


def run_population_sweep(cfg: ExperimentConfig, axis: str, values=None, out=None, log=None,
                         algorithms=(COST_MADDPG, ST_MADDPG)) -> ExperimentReport:
    if axis not in ("num_sellers", "num_buyers"):
        raise ValueError(f"population axis must be num_sellers or num_buyers, got {axis!r}")
    values = [int(v) for v in (values if values is not None else (cfg.sweep_values or range(1, 6)))]
    name = "sweep-sellers" if axis == "num_sellers" else "sweep-buyers"
    rep = _sweep(cfg, axis, values, lambda v: cfg.replace(**{axis: int(v)}), algorithms,
                 out, log, name)
    top = max(values)
    if axis == "num_sellers":
        for alg in algorithms:
            cells = [rep.table.get((alg, v)) for v in values]
            if len(values) >= 2 and all(c is not None for c in cells):
                rep.checks[f"{alg} per-seller utility non-increasing in seller count"] = non_increasing(
                    [c["mean_seller_utility"] for c in cells])
        if (COST_MADDPG, top) in rep.table and (ST_MADDPG, top) in rep.table:
            rep.checks[f"{COST_MADDPG} seller utility <= {ST_MADDPG} at {top} sellers"] = (
                rep.table[COST_MADDPG, top]["mean_seller_utility"]
                <= rep.table[ST_MADDPG, top]["mean_seller_utility"])
    else:
        if (COST_MADDPG, top) in rep.table and (ST_MADDPG, top) in rep.table:
            rep.checks[f"{COST_MADDPG} coalition utility > {ST_MADDPG} buyer utility at {top} buyers"] = (
                rep.table[COST_MADDPG, top]["total_buyer_utility"]
                > rep.table[ST_MADDPG, top]["total_buyer_utility"])
    return rep
