"""Benchmark front end: seeded experiment runs and result comparison.

`run` executes repeated seeded runs of one configuration and writes a
per-run CSV, a summary JSON and optional per-run event traces. `compare`
reads two per-run CSVs of the same instance and reports medians, means
and the rank-sum test on the run-level excess values.
"""
from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

from .engine import GlsParams
from .metrics import mann_whitney_u
from .runtime import (PLAIN_GLS, ConfigError, StopCriteria, build_topology,
                      run_parallel)
from .tsplib import load_instance

ALGOS = ("gls", "ebgls", "parallel")

CSV_COLUMNS = ["run_id", "worker_id", "seed", "final_cost", "excess_pct",
               "success", "wall_seconds", "iterations", "sends", "receives",
               "penalizations", "instance", "optimum"]


class CliError(Exception):
    pass


@dataclass
class ExperimentConfig:
    instance_path: str
    algo: str
    strategy: str | None = None
    topology_kind: str | None = None
    k: int = 1
    seed_base: int = 0
    lambda_coeff: float = 0.3
    w: float = 2.0
    u_cycle: int = 100
    nn_k: int = 10
    max_seconds: float | None = None
    target: str = "none"  # "optimum", "none" or an explicit cost
    max_iterations: int | None = None
    reps: int = 1
    out_dir: str = "results"
    trace: bool = False
    greedy_init: bool = False

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise CliError(f"unknown algorithm {self.algo!r}")
        if self.reps < 1:
            raise CliError("repetitions must be >= 1")
        if self.algo == "parallel":
            if self.strategy is None:
                raise CliError("parallel runs need --strategy")
            if self.k < 2:
                raise CliError("parallel runs need --k >= 2")
            if self.strategy != "independent" and self.topology_kind is None:
                raise CliError(f"strategy {self.strategy!r} needs --topology")
        if self.max_seconds is None and self.max_iterations is None \
                and self.target == "none":
            raise CliError("need --max-seconds, --max-iterations and/or --target")


def _resolve_target(config: ExperimentConfig, optimum: int | None) -> int | None:
    if config.target == "none":
        return None
    if config.target == "optimum":
        if optimum is None:
            raise CliError("target 'optimum' requested but the optimum is unknown")
        return optimum
    try:
        return int(config.target)
    except ValueError as exc:
        raise CliError(f"bad --target value {config.target!r}") from exc


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the configured repetitions; returns the summary dict."""
    config.validate()
    try:
        inst = load_instance(config.instance_path)
    except OSError as exc:
        raise CliError(f"cannot read instance: {exc}") from exc
    optimum = inst.known_optimum
    target = _resolve_target(config, optimum)

    if config.algo == "gls":
        strategy, k = PLAIN_GLS, 1
    elif config.algo == "ebgls":
        strategy, k = "elite_biased", 1
    else:
        strategy, k = config.strategy, config.k
    topology = None
    if config.algo == "parallel" and strategy != "independent":
        try:
            topology = build_topology(config.topology_kind, k)
        except ConfigError as exc:
            raise CliError(str(exc)) from exc

    params = GlsParams(lambda_coeff=config.lambda_coeff, w=config.w,
                       u_cycle=config.u_cycle, nn_k=config.nn_k,
                       greedy_init=config.greedy_init)
    stop = StopCriteria(max_seconds=config.max_seconds, target_cost=target,
                        max_iterations=config.max_iterations)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    run_results = []
    for rep in range(config.reps):
        seeds = [config.seed_base + rep * k + w for w in range(k)]
        result = run_parallel(inst, params, strategy, seeds, stop,
                              topology=topology, trace=config.trace)
        run_results.append(result)
        for rec in result.records:
            success = ""
            if target is not None:
                success = 1 if rec.final_cost <= target else 0
            exc_pct = ""
            if optimum is not None:
                exc_pct = f"{100.0 * (rec.final_cost - optimum) / optimum:.4f}"
            rows.append({
                "run_id": rep, "worker_id": rec.worker_id, "seed": rec.seed,
                "final_cost": rec.final_cost, "excess_pct": exc_pct,
                "success": success, "wall_seconds": f"{rec.duration:.3f}",
                "iterations": rec.iterations, "sends": rec.sends,
                "receives": rec.receives, "penalizations": rec.penalizations,
                "instance": inst.name, "optimum": optimum if optimum is not None else "",
            })
        if config.trace:
            trace_path = out_dir / f"trace_run{rep}.jsonl"
            with open(trace_path, "w") as f:
                for rec in result.records:
                    for ev in rec.events:
                        f.write(json.dumps({
                            "worker": rec.worker_id, "time": round(ev.time, 6),
                            "iteration": ev.iteration, "kind": ev.kind,
                            "cost": ev.cost,
                            "edges": list(map(list, ev.edges)) if ev.edges else None,
                        }) + "\n")

    csv_path = out_dir / "runs.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    summary = summarize(rows, config, inst.name, optimum, target)
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)
    return summary


def _run_level(rows: list[dict]) -> list[dict]:
    """Collapse per-worker rows to one row per run (best cost, max wall)."""
    runs: dict[int, dict] = {}
    for row in rows:
        rid = int(row["run_id"])
        cost = int(row["final_cost"])
        wall = float(row["wall_seconds"])
        success = None if row["success"] in ("", None) else int(row["success"])
        cur = runs.setdefault(rid, {"best_cost": cost, "wall_seconds": wall,
                                    "success": success})
        cur["best_cost"] = min(cur["best_cost"], cost)
        cur["wall_seconds"] = max(cur["wall_seconds"], wall)
        if success == 1:
            cur["success"] = 1
    return [runs[rid] for rid in sorted(runs)]


def summarize(rows: list[dict], config: ExperimentConfig, instance: str,
              optimum: int | None, target: int | None) -> dict:
    runs = _run_level(rows)
    excesses = None
    if optimum is not None:
        excesses = [100.0 * (r["best_cost"] - optimum) / optimum for r in runs]
    successes = [r for r in runs if r["success"] == 1]
    summary = {
        "instance": instance,
        "optimum": optimum,
        "algo": config.algo,
        "strategy": config.strategy,
        "topology": config.topology_kind,
        "k": config.k if config.algo == "parallel" else 1,
        "u_cycle": config.u_cycle,
        "w": config.w,
        "lambda_coeff": config.lambda_coeff,
        "nn_k": config.nn_k,
        "seed_base": config.seed_base,
        "target": target,
        "max_seconds": config.max_seconds,
        "max_iterations": config.max_iterations,
        "runs": len(runs),
        "success_count": len(successes) if target is not None else None,
        "best_cost": min(r["best_cost"] for r in runs),
        "mean_excess": statistics.fmean(excesses) if excesses else None,
        "median_excess": statistics.median(excesses) if excesses else None,
        "mean_runtime": statistics.fmean(r["wall_seconds"] for r in runs),
        "mean_runtime_success_only":
            statistics.fmean(r["wall_seconds"] for r in successes)
            if successes else None,
    }
    return summary


def _read_csv(path: str) -> list[dict]:
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CliError(f"{path} has no result rows")
    return rows


def compare_results(csv_a: str, csv_b: str, out=sys.stdout) -> dict:
    """Medians, means and the rank-sum test over two result files."""
    rows_a = _read_csv(csv_a)
    rows_b = _read_csv(csv_b)
    inst_a = {r["instance"] for r in rows_a}
    inst_b = {r["instance"] for r in rows_b}
    if inst_a != inst_b or len(inst_a) != 1:
        raise CliError(f"result files cover different instances: {inst_a} vs {inst_b}")
    opt_a = {r["optimum"] for r in rows_a} | {r["optimum"] for r in rows_b}
    if len(opt_a) != 1 or "" in opt_a:
        raise CliError("result files need one shared known optimum")
    optimum = int(opt_a.pop())
    report = {"instance": inst_a.pop(), "optimum": optimum}
    samples = []
    for name, rows in (("a", rows_a), ("b", rows_b)):
        runs = _run_level(rows)
        exc = [100.0 * (r["best_cost"] - optimum) / optimum for r in runs]
        samples.append(exc)
        report[name] = {
            "file": csv_a if name == "a" else csv_b,
            "runs": len(exc),
            "median_excess": statistics.median(exc),
            "mean_excess": statistics.fmean(exc),
        }
    u, p = mann_whitney_u(samples[0], samples[1])
    report["u_statistic"] = u
    report["p_value"] = p
    print(f"instance          : {report['instance']} (optimum {optimum})", file=out)
    for name in ("a", "b"):
        r = report[name]
        print(f"{name}: {r['file']}", file=out)
        print(f"   runs {r['runs']:4d}  median excess {r['median_excess']:.4f}%"
              f"  mean excess {r['mean_excess']:.4f}%", file=out)
    print(f"rank-sum U = {u:.1f}, two-sided p = {p:.4g}", file=out)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pebgls",
        description="Guided local search TSP benchmark with parallel "
                    "cooperative variants")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a batch of seeded runs")
    run_p.add_argument("--instance", required=True, help="TSPLIB .tsp file")
    run_p.add_argument("--algo", required=True, choices=ALGOS)
    run_p.add_argument("--strategy", choices=("independent", "elite_biased",
                                              "restart", "restart_elite_biased"))
    run_p.add_argument("--topology", choices=("ring", "torus"))
    run_p.add_argument("--k", type=int, default=1, help="worker count")
    run_p.add_argument("--seed-base", type=int, default=0)
    run_p.add_argument("--lambda-coeff", type=float, default=0.3)
    run_p.add_argument("--w", type=float, default=2.0)
    run_p.add_argument("--u-cycle", type=int, default=100)
    run_p.add_argument("--nn-k", type=int, default=10)
    run_p.add_argument("--max-seconds", type=float)
    run_p.add_argument("--max-iterations", type=int)
    run_p.add_argument("--target", default="none",
                       help="'optimum', 'none' or an explicit cost")
    run_p.add_argument("--reps", type=int, default=1)
    run_p.add_argument("--out", default="results")
    run_p.add_argument("--trace", action="store_true",
                       help="write per-run event logs")
    run_p.add_argument("--greedy-init", action="store_true",
                       help="nearest-neighbor start instead of random")

    cmp_p = sub.add_parser("compare", help="rank-sum comparison of two runs.csv")
    cmp_p.add_argument("csv_a")
    cmp_p.add_argument("csv_b")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = ExperimentConfig(
                instance_path=args.instance, algo=args.algo,
                strategy=args.strategy, topology_kind=args.topology, k=args.k,
                seed_base=args.seed_base, lambda_coeff=args.lambda_coeff,
                w=args.w, u_cycle=args.u_cycle, nn_k=args.nn_k,
                max_seconds=args.max_seconds, target=args.target,
                max_iterations=args.max_iterations, reps=args.reps,
                out_dir=args.out, trace=args.trace,
                greedy_init=args.greedy_init)
            summary = run_experiment(config)
            print(json.dumps(summary, indent=2))
        else:
            compare_results(args.csv_a, args.csv_b)
    except (CliError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
