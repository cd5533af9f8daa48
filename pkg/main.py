import argparse
import logging
import os
import sys
import time
from typing import List, Optional

from costs import CostError
from network import GraphError
from runner import run_trials
from scenario_io import (
    ScenarioError,
    bundled_scenarios,
    load_scenario,
    parse_sweep_param,
    read_scenario_dict,
    run_sweep,
    write_results,
    write_validation_report,
)
from validation import SUITES

"""Command line entry point: run scenarios, sweep cost weights, and validate the estimator."""

# try to import local defaults from config.py w/ environment fallback
try:
    from config import OUTPUT_DIR
except ImportError:
    OUTPUT_DIR = os.getenv("PIC_OUTPUT_DIR")
try:
    from config import LOG_LEVEL, MAX_WORKERS
except ImportError:
    LOG_LEVEL, MAX_WORKERS = "INFO", 1

logger = logging.getLogger(__name__)


def resolve_output_dir(cli_out: Optional[str], default: str, name: str) -> str:
    """--out wins, then OUTPUT_DIR / PIC_OUTPUT_DIR (one sub-directory per scenario), then the scenario's own."""
    if cli_out:
        return cli_out
    if OUTPUT_DIR:
        return os.path.join(OUTPUT_DIR, name)
    return default


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = resolve_output_dir(args.out, scenario.output_dir, scenario.name)
    scenario = scenario.with_output_dir(out_dir)
    if args.trials is not None:
        scenario.trials = args.trials
    if args.seed is not None:
        scenario.seed = args.seed

    start_time = time.time()
    results = run_trials(scenario, scenario.trials, scenario.seed, max_workers=args.max_workers,
                         agent_workers=args.agent_workers)
    write_results(results, scenario, out_dir)

    failed = [r for r in results if not r.ok]
    logger.info(f"Run complete in {time.time() - start_time:.1f}s")
    logger.info(f"Successful trials: {len(results) - len(failed)}/{len(results)}")
    logger.info(f"Results saved to: {out_dir}")
    return 1 if failed else 0


def cmd_validate(args) -> int:
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    out_dir = resolve_output_dir(args.out, os.path.join("results", "validation"), "validation")
    ok = True
    for name in suites:
        logger.info(f"Running {name} suite (seed {args.seed})")
        report = SUITES[name](seed=args.seed)
        write_validation_report(report, os.path.join(out_dir, f"validation_{name}.json"))
        if report.passed:
            logger.info(f"{name}: all {len(report.checks)} checks passed")
        else:
            logger.error(f"{name}: failed checks {report.failed_checks}")
            ok = False
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    raw = read_scenario_dict(args.scenario)
    params = [parse_sweep_param(p) for p in args.param]
    name = f"{raw['name']}_sweep"
    out_dir = resolve_output_dir(args.out, os.path.join("results", name), name)
    summary = run_sweep(raw, params, out_dir, trials=args.trials, seed=args.seed,
                        max_workers=args.max_workers, agent_workers=args.agent_workers)
    return 1 if summary["failed"].sum() else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Cooperative path-integral control of multi-UAV systems on a communication network"
    )
    parser.add_argument("--log-level", default=LOG_LEVEL, help=f"Logging level (default: {LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run closed-loop trials of a scenario")
    run.add_argument("scenario", help=f"Scenario file or bundled name ({', '.join(bundled_scenarios())})")
    run.add_argument("--trials", type=int, help="Number of trials (default: from the scenario)")
    run.add_argument("--seed", type=int, help="Base seed (default: from the scenario)")
    run.add_argument("--out", help="Output directory")
    run.add_argument("--max-workers", type=int, default=MAX_WORKERS,
                     help=f"Trials run in parallel (default: {MAX_WORKERS})")
    run.add_argument("--agent-workers", type=int, default=1,
                     help="Threads planning the agents of one cycle (default: 1)")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="Run the oracle and invariant checks")
    validate.add_argument("--suite", choices=["all"] + list(SUITES), default="all")
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--out", help="Directory for the JSON reports")
    validate.set_defaults(func=cmd_validate)

    sweep = sub.add_parser("sweep", help="Run a scenario once per parameter value")
    sweep.add_argument("scenario", help="Scenario file or bundled name")
    sweep.add_argument("--param", action="append", required=True,
                       help="path=v1,v2,... e.g. costs.pair_weights.1-3=0,0.7,1.4 (repeat to sweep jointly)")
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--out", help="Output directory")
    sweep.add_argument("--max-workers", type=int, default=MAX_WORKERS)
    sweep.add_argument("--agent-workers", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    try:
        return args.func(args)
    except (ScenarioError, CostError, GraphError) as e:
        logger.error(f"Invalid scenario: {e}")
        return 1
    except Exception as e:
        logger.exception(f"Command '{args.command}' failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
