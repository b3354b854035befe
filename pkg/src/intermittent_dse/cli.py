"""Command line entry point: ``run``, ``compare`` and ``schedule-check``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import schedule as sched_mod
from . import team_graph as tg
from .baselines import run_strategy
from .errors import DSEError, ScenarioError, SimulationAborted
from .runtime import metrics, write_outputs
from .scenario import STRATEGIES, Scenario, load


def _load(args) -> Scenario:
    sc = load(args.config)
    if getattr(args, "t_end", None) is not None:
        sc.t_end = int(args.t_end)
    return sc


def cmd_run(args) -> int:
    sc = _load(args)
    seed = sc.seed if args.seed is None else args.seed
    strategy = args.strategy or sc.strategy
    log = run_strategy(sc, strategy, seed)
    out = Path(args.out or f"out/{sc.name}_{strategy}_seed{seed}")
    summary = write_outputs(log, out)
    print(f"{sc.name} strategy={strategy} seed={seed}")
    print(f"mean localization error e_loc = {summary['e_loc_mean']:.4f} m")
    print(f"mean uncertainty lambda = {summary['lambda_mean']:.4f} m^2")
    print(f"outputs written to {out}")
    return 0


def _one(job):
    sc, strategy, seed = job
    return strategy, seed, metrics(run_strategy(sc, strategy, seed))


def cmd_compare(args) -> int:
    sc = _load(args)
    if args.seeds < 1:
        raise ScenarioError("--seeds must be at least 1")
    strategies = args.strategy.split(",") if args.strategy else list(STRATEGIES)
    for s in strategies:
        if s not in STRATEGIES:
            raise ScenarioError(f"unknown strategy {s!r}")
    base = sc.seed if args.seed is None else args.seed
    jobs = [(sc, s, base + j) for s in strategies for j in range(args.seeds)]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]

    rows = []
    for s in strategies:
        ms = [m for st, _, m in results if st == s]
        e = np.array([m["e_loc_mean"] for m in ms])
        lam = np.array([m["lambda_mean"] for m in ms])
        rows.append({
            "strategy": s, "n_seeds": len(ms),
            "e_loc_mean": float(e.mean()), "e_loc_std": float(e.std(ddof=0)),
            "lambda_mean": float(lam.mean()), "lambda_std": float(lam.std(ddof=0)),
        })
    out = Path(args.out or f"out/{sc.name}_compare")
    out.mkdir(parents=True, exist_ok=True)
    cols = ["strategy", "n_seeds", "e_loc_mean", "e_loc_std", "lambda_mean", "lambda_std"]
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], (str, int)) else f"{r[c]:.9f}" for c in cols])
    per_run = [{"strategy": s, "seed": seed, **m} for s, seed, m in results]
    (out / "runs.json").write_text(json.dumps(per_run, sort_keys=True, indent=2) + "\n")

    print(f"{sc.name}: {args.seeds} seed(s) from {base}")
    print(f"{'':<14}" + "".join(f"{r['strategy']:>20}" for r in rows))
    print(f"{'e_loc (m)':<14}" + "".join(
        f"{r['e_loc_mean']:>11.3f} +- {r['e_loc_std']:.3f}" for r in rows))
    print(f"{'lambda (m^2)':<14}" + "".join(
        f"{r['lambda_mean']:>11.3f} +- {r['lambda_std']:.3f}" for r in rows))
    return 0


def cmd_schedule_check(args) -> int:
    sc = load(args.config)
    g = tg.build(sc.teams)
    s = sched_mod.from_slots(g, sc.schedule) if sc.schedule else sched_mod.synthesize(g)
    L = tg.longest_shortest_path(g)
    print(f"teams: {g.M}  robots: {g.N}  connected: yes")
    for i, team in enumerate(g.teams):
        print(f"  team {i}: robots {sorted(team)}  degree {g.degree(i)}  slot {s.slot(i)}")
    print(f"max degree: {g.max_degree()}")
    print(f"longest shortest path L: {L} nodes ({L - 1} edges)")
    print(f"period T: {s.period}")
    print("robot sequences (X = idle):")
    for r in g.robots:
        seq = " ".join("X" if e is None else str(e) for e in s.sequences[r])
        print(f"  {r}: [{seq}]")
    if g.M > 1:
        print(f"delay bound D = (T-1)*L: {tg.delay_bound(g, s.period)} epochs "
              f"(with L in edges: {tg.delay_bound_edges(g, s.period)})")
    else:
        print("delay bound D: 0 epochs (single team)")
    ok = sched_mod.validate(s, g)
    print(f"conflict-free: {'yes' if ok else 'NO'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="intermittent-dse",
        description="Distributed target tracking with intermittently communicating robot teams.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="scenario YAML file or bundled name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--t-end", type=int, default=None, dest="t_end")

    r = sub.add_parser("run", help="simulate one strategy and write traces")
    common(r)
    r.add_argument("--strategy", choices=STRATEGIES, default=None)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="mean and std of the metrics over seeds")
    common(c)
    c.add_argument("--strategy", default=None, help="comma-separated list (default: all)")
    c.add_argument("--seeds", type=int, default=5)
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("schedule-check", help="team graph statistics and schedule")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_schedule_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostic, sort_keys=True, default=str), file=sys.stderr)
        return 3
    except (DSEError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
