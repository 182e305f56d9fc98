"""
experiment.py
Seeded repeat runs, result/trace files, summaries and the population bench.

Per run r (seed s) the output directory receives
    run_{r:03d}_trace.csv        iteration,player,best_cost,mean_cost,stagnation
    run_{r:03d}_strategies.csv   iteration,variable,value (best joint vector)
    run_{r:03d}_result.yaml      profile, costs, Nash report, echoed config
and after all runs summary.yaml. Wall-clock times only go to the summary.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from nash_evo.cli.profile_io import profile_to_dict
from nash_evo.core.config_manager import DEFAULT_HYBRID_ITER, ExperimentConfig
from nash_evo.core.errors import ConfigError, GameSpecError, NashEvoError, SolverAbortedError
from nash_evo.core.event_bus import RUN_FAILED, EventBus
from nash_evo.core.ga_solver import run_ga
from nash_evo.core.game_model import DynamicGame, StrategyMode, profile_to_vector
from nash_evo.core.local_search import SimplexConfig
from nash_evo.core.pso_solver import PsoConfig, run_pso
from nash_evo.core.result import TRACE_HEADER, SolveResult, TraceRow
from nash_evo.core.templates import build_game
from nash_evo.core.verify import certify_nash, lq_openloop_nash

log = logging.getLogger("Experiment")

BENCH_SIZES = (10, 20, 40, 80)
BENCH_TOLERANCE = 1e-2
MARGINAL_REDUCTION = 0.2


# ----------------------------------------------------------------------
# Runs
# ----------------------------------------------------------------------
def solve_once(game: DynamicGame, config: ExperimentConfig, seed: int,
               bus: EventBus | None = None) -> SolveResult:
    """One seeded solver run, certified when verification is enabled."""
    solver, mode, workers = config.solver, config.game.strategy_mode, config.run.workers
    if solver.kind == "ga":
        result = run_ga(game, dataclasses.replace(solver.ga, rng_seed=seed), mode, bus, workers)
    else:
        result = run_pso(
            game, dataclasses.replace(solver.pso, rng_seed=seed), mode, bus, workers, solver.local_search
        )
    if config.verification.enabled:
        v = config.verification
        result.report = certify_nash(game, result.profile, v.tolerance, v.budget, solver.local_search)
    return result


def run_experiment(config: ExperimentConfig, bus: EventBus | None = None) -> list[SolveResult]:
    """All configured runs; failed runs are recorded in the summary and skipped."""
    game = build_game(config.game.template, config.game.params)
    out_dir = config.run.out_dir
    os.makedirs(out_dir, exist_ok=True)

    results, failures, durations = [], [], []
    for r, seed in enumerate(config.run.run_seeds()):
        stem = os.path.join(out_dir, f"run_{r:03d}")
        log.info("Run %d/%d (seed %d)", r + 1, config.run.repeat, seed)
        try:
            result = solve_once(game, config, seed, bus)
        except (ConfigError, GameSpecError):
            raise
        except NashEvoError as e:
            log.error("Run %d (seed %d) failed: %s", r, seed, e)
            failures.append({"run": r, "seed": seed, "type": type(e).__name__, "error": str(e)})
            if isinstance(e, SolverAbortedError):
                write_trace(e.trace, f"{stem}_trace.csv")
            if bus:
                bus.emit(RUN_FAILED, {"run": r, "seed": seed, "error": str(e)})
            continue
        emit_trace(result, f"{stem}_trace.csv")
        emit_strategy_trace(result, f"{stem}_strategies.csv")
        write_result(result, config.for_seed(seed), f"{stem}_result.yaml")
        results.append(result)
        durations.append(result.duration)

    summary = summarize(results, failures)
    summary["template"] = config.game.template
    summary["solver"] = config.solver.kind
    summary["durations"] = [float(d) for d in durations]
    _dump_yaml(summary, os.path.join(out_dir, "summary.yaml"))
    log.info("Experiment finished: %d runs, %d failures, output in %s", len(results), len(failures), out_dir)
    return results


def summarize(results: Sequence[SolveResult], failures: Iterable[dict] = ()) -> dict[str, Any]:
    """Mean, std and max - min spread of the final per-player costs."""
    failures = list(failures)
    summary: dict[str, Any] = {
        "kind": "experiment_summary",
        "runs": len(results),
        "seeds": [int(r.seed) for r in results],
        "failures": failures,
    }
    if results:
        costs = np.array([r.costs for r in results])
        summary["final_costs"] = {
            "mean": costs.mean(axis=0).tolist(),
            "std": costs.std(axis=0).tolist(),
            "spread": (costs.max(axis=0) - costs.min(axis=0)).tolist(),
        }
        summary["iterations"] = [int(r.iterations) for r in results]
        reports = [r.report for r in results if r.report is not None]
        if reports:
            summary["certified"] = sum(rep.certified for rep in reports)
            summary["max_gap"] = float(max(np.max(rep.gaps, initial=0.0) for rep in reports))
    return summary


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------
def _float(value: float) -> str:
    return repr(float(value))


def _open_for_write(path: str):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}", path) from e


def write_trace(rows: Sequence[TraceRow], path: str):
    with _open_for_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in rows:
            writer.writerow([row.iteration, row.player, _float(row.best_cost), _float(row.mean_cost), row.stagnation])


def emit_trace(result: SolveResult, path: str):
    """Convergence trace CSV, one row per (iteration, player)."""
    write_trace(result.trace, path)


def emit_strategy_trace(result: SolveResult, path: str):
    """Best joint strategy vector after every iteration."""
    with _open_for_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("iteration", "variable", "value"))
        for t, vec in enumerate(result.strategy_trace, start=1):
            for j, value in enumerate(vec):
                writer.writerow([t, j, _float(value)])


def result_to_dict(result: SolveResult, config: ExperimentConfig | None = None) -> dict[str, Any]:
    data: dict[str, Any] = {
        "kind": "solve_result",
        "solver": result.solver,
        "seed": int(result.seed),
        "iterations": int(result.iterations),
        "stop_reason": result.stop_reason,
        "evaluations": int(result.evaluations),
        "costs": [float(c) for c in result.costs],
        "profile": profile_to_dict(result.profile),
        "report": result.report.to_dict() if result.report is not None else None,
    }
    if config is not None:
        data["config"] = config.to_dict()
    return data


def write_result(result: SolveResult, config: ExperimentConfig | None, path: str):
    _dump_yaml(result_to_dict(result, config), path)


def _dump_yaml(data: dict[str, Any], path: str):
    with _open_for_write(path) as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)


# ----------------------------------------------------------------------
# Population bench
# ----------------------------------------------------------------------
def iterations_to_tolerance(result: SolveResult, target: np.ndarray, tolerance: float = BENCH_TOLERANCE) -> int | None:
    """First iteration whose best strategy is within tolerance of target (max norm)."""
    for t, vec in enumerate(result.strategy_trace, start=1):
        if np.max(np.abs(vec - target), initial=0.0) <= tolerance:
            return t
    return None


def run_bench(config: ExperimentConfig, sizes: Sequence[int] = BENCH_SIZES,
              tolerance: float = BENCH_TOLERANCE) -> dict[str, Any]:
    """Population/swarm size sweep on an LQ game, measured against the open-loop oracle.

    Records, per size, the median iterations until the best strategy is
    within tolerance of the oracle, and whether going beyond 40 members
    still cut that median by at least 20%.
    """
    game = build_game(config.game.template, config.game.params)
    if game.lq_spec is None:
        raise GameSpecError(f"bench needs an LQ template, '{config.game.template}' has no oracle")
    if config.game.strategy_mode is not StrategyMode.OPEN_LOOP:
        raise GameSpecError("bench compares against the open-loop oracle; use strategy_mode: open_loop")
    target = profile_to_vector(lq_openloop_nash(game))
    solver = config.solver
    seeds = config.run.run_seeds()

    rows = []
    for size in sizes:
        reached = []
        for seed in seeds:
            if solver.kind == "ga":
                ga = dataclasses.replace(solver.ga, population_size=size, rng_seed=seed)
                result = run_ga(game, ga, workers=config.run.workers)
            else:
                pso = dataclasses.replace(solver.pso, swarm_size=size, rng_seed=seed)
                result = run_pso(game, pso, workers=config.run.workers, simplex=solver.local_search)
            reached.append(iterations_to_tolerance(result, target, tolerance))
        hits = [t for t in reached if t is not None]
        median = float(np.median(hits)) if hits else None
        rows.append({
            "size": int(size),
            "median_iterations": median,
            "reached": len(hits),
            "runs": len(reached),
            "iterations": reached,
        })
        log.info("Bench size %d: median iterations to %.0e = %s (%d/%d runs)",
                 size, tolerance, median, len(hits), len(reached))

    by_size = {row["size"]: row["median_iterations"] for row in rows}
    marginal = None
    if by_size.get(40) and by_size.get(80) is not None:
        marginal = bool((by_size[40] - by_size[80]) / by_size[40] < MARGINAL_REDUCTION)
    report = {
        "kind": "bench",
        "solver": solver.kind,
        "template": config.game.template,
        "tolerance": float(tolerance),
        "seeds": seeds,
        "sizes": rows,
        "marginal_beyond_40": marginal,
    }
    if solver.kind != "ga":
        report["hybrid_vs_plain"] = compare_hybrid(
            game, target, solver.pso, seeds, tolerance, solver.local_search, config.run.workers
        )
    os.makedirs(config.run.out_dir, exist_ok=True)
    _dump_yaml(report, os.path.join(config.run.out_dir, "bench.yaml"))
    return report


def compare_hybrid(game: DynamicGame, target: np.ndarray, pso: PsoConfig, seeds: Sequence[int],
                   tolerance: float = BENCH_TOLERANCE, simplex: SimplexConfig = SimplexConfig(),
                   workers: int = 1) -> dict[str, Any]:
    """Median iterations to the tolerance ball with and without simplex refinement.

    The outcome is recorded only; a slower hybrid is not an error.
    """
    hybrid_iter = pso.hybrid_iter or DEFAULT_HYBRID_ITER
    medians = {}
    for label, iters in (("plain", 0), ("hybrid", hybrid_iter)):
        reached = [
            iterations_to_tolerance(
                run_pso(game, dataclasses.replace(pso, hybrid_iter=iters, rng_seed=seed), workers=workers, simplex=simplex),
                target, tolerance,
            )
            for seed in seeds
        ]
        hits = [t for t in reached if t is not None]
        medians[label] = {
            "median_iterations": float(np.median(hits)) if hits else None,
            "reached": len(hits),
            "iterations": reached,
        }
    plain, hybrid = medians["plain"]["median_iterations"], medians["hybrid"]["median_iterations"]
    not_slower = None if plain is None or hybrid is None else bool(hybrid <= plain)
    log.info("Hybrid (%d simplex iterations) vs plain PSO: median %s vs %s iterations to %.0e",
             hybrid_iter, hybrid, plain, tolerance)
    return {"hybrid_iter": int(hybrid_iter), "seeds": [int(s) for s in seeds], **medians,
            "hybrid_not_slower": not_slower}
