"""
main.py
Command-line front end.

    nash-evo solve  <config>                 seeded solver runs + summary
    nash-evo verify <config> <profile-file>  Nash certification of a profile
    nash-evo bench  <config>                 population / swarm size sweep

Exit codes: 0 success, 1 run failure (or profile not certified), 2 config error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from nash_evo.cli.experiment import BENCH_SIZES, run_bench, run_experiment
from nash_evo.cli.profile_io import read_profile
from nash_evo.core.config_manager import ExperimentConfig, load_config
from nash_evo.core.errors import ConfigError, GameSpecError, NashEvoError
from nash_evo.core.event_bus import SOLVER_FINISHED, STAGNATION_MUTATION, TRACE_ROW, EventBus
from nash_evo.core.logger import setup_logging
from nash_evo.core.templates import build_game
from nash_evo.core.verify import certify_nash

log = logging.getLogger("NashEvo")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", "-s", type=int, help="Run a single run with this seed (also seeds the verifier)")
    common.add_argument("--out-dir", "-o", type=str, help="Output directory (overrides run.out_dir)")
    common.add_argument("--repeat", "-r", type=int, help="Number of seeded runs (overrides run.repeat)")
    common.add_argument("--solver", choices=("ga", "pso", "hybrid_pso"), help="Override solver.kind")
    common.add_argument("--quiet", "-q", action="store_true", help="Only log warnings and errors")

    parser = argparse.ArgumentParser(
        prog="nash-evo",
        description="Approximate Nash equilibria of dynamic games with co-evolutionary GA and hybrid PSO",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve = subparsers.add_parser("solve", parents=[common], help="Run the configured experiment")
    solve.add_argument("config", help="YAML experiment config (or a result file)")

    verify = subparsers.add_parser("verify", parents=[common], help="Certify a strategy profile")
    verify.add_argument("config", help="YAML experiment config naming the game")
    verify.add_argument("profile", help="YAML profile file or result file")

    bench = subparsers.add_parser("bench", parents=[common], help="Population size sweep on an LQ game")
    bench.add_argument("config", help="YAML experiment config")
    bench.add_argument("--sizes", type=int, nargs="+", default=list(BENCH_SIZES), help="Sizes to sweep")
    return parser


def _progress_bus() -> EventBus:
    bus = EventBus()
    bus.subscribe(TRACE_ROW, lambda e: log.debug(
        "[%s] iteration %d player %d best %.6g", e["solver"], e["row"].iteration, e["row"].player, e["row"].best_cost))
    bus.subscribe(STAGNATION_MUTATION, lambda e: log.debug(
        "[%s] stagnation mutation at iteration %d", e["solver"], e["iteration"]))
    bus.subscribe(SOLVER_FINISHED, lambda e: log.info(
        "[%s] finished after %d iterations (%s)", e["solver"], e["iterations"], e["stop_reason"]))
    return bus


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    return config.with_overrides(seed=args.seed, out_dir=args.out_dir, repeat=args.repeat, solver=args.solver)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def cmd_solve(args) -> int:
    config = _load(args)
    results = run_experiment(config, _progress_bus())
    for r in results:
        line = f"seed {r.seed}: {r.solver} {r.iterations} iterations, costs {[round(float(c), 6) for c in r.costs]}"
        if r.report is not None:
            line += f", certified={r.report.certified} (max gap {max(r.report.gaps, default=0.0):.3g})"
        print(line)
    failed = config.run.repeat - len(results)
    if failed:
        print(f"{failed} run(s) failed, see {os.path.join(config.run.out_dir, 'summary.yaml')}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load(args)
    game = build_game(config.game.template, config.game.params)
    profile = read_profile(args.profile, game)
    v = config.verification
    report = certify_nash(game, profile, v.tolerance, v.budget, config.solver.local_search)

    os.makedirs(config.run.out_dir, exist_ok=True)
    path = os.path.join(config.run.out_dir, "verify_report.yaml")
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump({"kind": "nash_report", **report.to_dict()}, f, default_flow_style=False, sort_keys=False)

    for i, gap in enumerate(report.gaps):
        print(f"player {i}: cost {report.costs[i]:.6g}, best-response gap {gap:.3g}")
    print(f"certified at tolerance {v.tolerance:g}: {report.certified}  (report: {path})")
    return EXIT_OK if report.certified else EXIT_FAILURE


def cmd_bench(args) -> int:
    config = _load(args)
    report = run_bench(config, args.sizes)
    for row in report["sizes"]:
        print(f"size {row['size']:>4}: median iterations {row['median_iterations']} ({row['reached']}/{row['runs']} runs)")
    print(f"marginal improvement beyond 40: {report['marginal_beyond_40']}")
    comparison = report.get("hybrid_vs_plain")
    if comparison:
        print(f"median iterations, hybrid vs plain: {comparison['hybrid']['median_iterations']} "
              f"vs {comparison['plain']['median_iterations']}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(quiet=args.quiet)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GameSpecError) as e:
        log.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except NashEvoError as e:
        log.error("Run failed: %s", e)
        return EXIT_FAILURE
    except OSError as e:
        log.error("I/O error: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
