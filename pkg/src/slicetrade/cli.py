"""Command line entry point: ``slicetrade <command> [--config PATH] [--seeds LIST] ...``.

Exit status is 0 only when every check of the selected command passes.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .env import env_reset
from .stackelberg import OracleInfeasible, solve_se_bruteforce, verify_se


def _seeds(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file (default: built-in defaults)")
    common.add_argument("--seeds", type=_seeds, help="comma list or range, e.g. 0,1,2 or 0-4")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--iterations", type=int, help="training iterations per run")
    p = argparse.ArgumentParser(prog="slicetrade", parents=[common],
                                description="PRB trading market experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("converge", parents=[common], help="compare all algorithms over training")
    for name in ("sweep-bandwidth", "sweep-sellers", "sweep-buyers"):
        sp = sub.add_parser(name, parents=[common], help=f"{name.split('-')[1]} sweep")
        sp.add_argument("--values", help="comma-separated sweep values")
    op = sub.add_parser("oracle", parents=[common], help="brute-force equilibrium for the configured market")
    op.add_argument("--seed", type=int, default=None, help="scenario seed (default: first seed)")
    sub.add_parser("check", parents=[common], help="run the invariant suite on a short run")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.out:
        changes["output_dir"] = str(args.out)
    if args.iterations:
        changes["iterations"] = args.iterations
    return cfg.replace(**changes) if changes else cfg


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _finish(rep, out: Path, filename: str) -> int:
    ex.emit_csv(rep, out / filename)
    print(rep.summary())
    print(f"wrote {out / filename}")
    return 0 if rep.passed else 1


def cmd_oracle(cfg, seed) -> int:
    env = env_reset(cfg, seed)
    try:
        sol = solve_se_bruteforce(env.game, cfg.oracle_budget)
    except OracleInfeasible as exc:
        print(f"oracle infeasible at this scale: {exc}")
        return 1
    ok, gain = verify_se(env.game, sol.prices, sol.quantities)
    print(f"partition {env.partition.label()}  caps {np.asarray(env.game.caps).tolist()}")
    print(f"prices {sol.prices.tolist()}")
    print(f"quantities {sol.quantities.tolist()}")
    print(f"leader utilities {sol.leader_utils.tolist()}")
    print(f"follower utilities {sol.follower_utils.tolist()}")
    kind = "exact" if sol.exact else f"epsilon-equilibrium (epsilon {sol.epsilon:.6g})"
    print(f"{kind}; verify {'pass' if ok else 'fail'} (max deviation gain {gain:.3g})")
    return 0 if (ok or not sol.exact) else 1


def cmd_check(cfg) -> int:
    from . import invariants
    results = invariants.run_all(cfg)
    for name, ok, detail in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    values = getattr(args, "values", None)
    values = [float(v) for v in values.split(",")] if values else None
    if args.command == "converge":
        return _finish(ex.run_convergence(cfg, out=out, log=_log), out, "converge.csv")
    if args.command == "sweep-bandwidth":
        return _finish(ex.run_pricing_sweep(cfg, values, out=out, log=_log), out, "sweep_bandwidth.csv")
    if args.command == "sweep-sellers":
        return _finish(ex.run_population_sweep(cfg, "num_sellers", values, out=out, log=_log),
                       out, "sweep_sellers.csv")
    if args.command == "sweep-buyers":
        return _finish(ex.run_population_sweep(cfg, "num_buyers", values, out=out, log=_log),
                       out, "sweep_buyers.csv")
    if args.command == "oracle":
        return cmd_oracle(cfg, args.seed if args.seed is not None else cfg.seeds[0])
    if args.command == "check":
        return cmd_check(cfg)
    return 2


if __name__ == "__main__":
    sys.exit(main())
