"""
Command-line interface
simulate, grid, replay and gen-log subcommands over ExperimentRunner
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from codband.errors import CodbandError
from codband.services.experiment_runner import ExperimentRunner
from codband.utils.config import load_config

logger = logging.getLogger("codband")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codband",
        description="Collaborative non-stationary bandit simulations and replay evaluation")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="KEY=VALUE experiment file (SCHEMA_VERSION=1)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--reps", type=int, help="number of replications")
    common.add_argument("--policies", help="comma-separated policy names")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--log-level", default=os.getenv("CODBAND_LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--progress", action="store_true", help="show a progress bar")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run policies on a simulated environment")
    sub.add_parser("grid", parents=[common], help="run policies over the environment grid")
    replay = sub.add_parser("replay", parents=[common], help="replay an event log through policies")
    replay.add_argument("log", help="event log written by gen-log")
    gen_log = sub.add_parser("gen-log", parents=[common], help="log uniform-random interactions")
    gen_log.add_argument("--rounds", type=int, help="rounds to log (default: horizon)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        policies = tuple(p.strip() for p in args.policies.split(",") if p.strip()) if args.policies else None
        config = load_config(args.config, seed=args.seed, output_dir=args.out, replications=args.reps,
                             policies=policies, n_jobs=args.jobs)
    except (CodbandError, OSError) as e:
        logger.error("%s", e)
        return 2

    runner = ExperimentRunner(config, progress=args.progress)
    if args.command == "simulate":
        result = runner.run_experiment()
    elif args.command == "grid":
        result = runner.run_table_grid()
    elif args.command == "replay":
        result = runner.run_replay(args.log)
    else:
        result = runner.generate_log(args.rounds)

    if not result["success"]:
        return 2
    if "summary" in result:
        print(result["summary"].to_string(index=False))
    print(result.get("run_dir") or result.get("path"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
