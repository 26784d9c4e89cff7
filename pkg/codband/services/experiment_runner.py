"""
Experiment Runner Service
Wires environments and policies into seeded replications, runs them in
parallel and writes regret, detection, grid and replay tables
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from codband.database.artifacts import ArtifactStore
from codband.errors import CodbandError, EventLogFormatError, UnsupportedOperationError
from codband.models.change_detect import epsilon
from codband.policies import DETECTING_POLICIES, Policy, PolicySettings, build_policy
from codband.services.environment import (
    EnvConfig,
    EnvironmentTrace,
    audit_assumption1,
    export_trace,
    generate_trace,
    log_uniform_events,
    serve_round,
)
from codband.services.evaluation import (
    RegretCurve,
    normalized_reward,
    read_event_log,
    replay,
    write_event_log,
)
from codband.utils.config import ExperimentConfig, grid_rows
from codband.utils.seeding import log_rng, policy_rng, replication_seeds, serve_rng, trace_rng

logger = logging.getLogger(__name__)

DETECTION_COLUMNS = ["policy", "seed", "user", "round"]
SUMMARY_COLUMNS = ["policy", "mean_regret", "stderr", "reps"]
GRID_COLUMNS = ["grid_row", "policy", "mean_regret", "stderr", "reps"]


@dataclass
class CellResult:
    """Outcome of one (replication, policy) cell"""

    policy: str
    replication: int
    seed: int
    regret: pd.DataFrame
    final_regret: float
    detections: List[Tuple[int, int]] = field(default_factory=list)
    wall_clock: float = 0.0
    extras: Dict[str, Any] = field(default_factory=dict)


def run_policy_on_trace(trace: EnvironmentTrace, policy: Policy, rng: np.random.Generator,
                        seed: int = 0) -> Tuple[RegretCurve, List[Tuple[int, int]]]:
    """
    Serve every user once per round, in user order, and record pseudo-regret

    Args:
        trace: Ground truth
        policy: Policy under test
        rng: Serving stream (candidates and noise)
        seed: Replication seed written into the curve

    Returns:
        The regret curve and the (user, round) pairs where the policy detected a change
    """
    curve = RegretCurve(policy.name, seed)
    detections = []
    for t in range(trace.config.horizon):
        for user in range(trace.n_users):
            outcome = serve_round(trace, t, user, rng)
            decision = policy.choose(user, outcome.candidates, truth=outcome.model_id)
            curve.record_regret(outcome, decision, t, user)
            arm = decision.arm_index
            if policy.feedback(user, outcome.candidates[arm], outcome.reward_for(arm)):
                detections.append((user, t))
    return curve, detections


def run_cell(env: EnvConfig, settings: PolicySettings, policy_name: str,
             replication: int, rep_seed: int) -> CellResult:
    started = time.perf_counter()
    try:
        trace = generate_trace(env, trace_rng(rep_seed))
        policy = build_policy(policy_name, env.dim, settings, policy_rng(rep_seed, policy_name))
        curve, detections = run_policy_on_trace(trace, policy, serve_rng(rep_seed), seed=rep_seed)
    except CodbandError as e:
        logger.error("%s rep %d (seed %d) failed: %s", policy_name, replication, rep_seed, e)
        raise
    extras = {}
    if policy_name == "codband":
        extras = {"pool_size": len(policy.pool), "alpha0": policy.pool.alpha0}
    result = CellResult(policy_name, replication, rep_seed, curve.to_frame(), curve.final_regret,
                        detections, time.perf_counter() - started, extras)
    logger.info("%s rep %d: final regret %.2f, %d detections (%.1fs)",
                policy_name, replication, result.final_regret, len(detections), result.wall_clock)
    return result


def summarize(results: List[CellResult], policies) -> pd.DataFrame:
    """Mean and standard error of final regret across replications per policy"""
    rows = []
    for name in policies:
        finals = np.array([r.final_regret for r in results if r.policy == name])
        if finals.size == 0:
            continue
        if finals.size == 1:
            logger.warning("%s has a single replication; standard error reported as 0", name)
        stderr = float(finals.std(ddof=1) / np.sqrt(finals.size)) if finals.size > 1 else 0.0
        rows.append({"policy": name, "mean_regret": float(finals.mean()), "stderr": stderr,
                     "reps": int(finals.size)})
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, progress: bool = False):
        """Runner writing into config.output_dir"""
        self.config = config
        self.store = ArtifactStore(config.output_dir)
        self.progress = progress

    def _run_cells(self, cells: List[Tuple]) -> List[CellResult]:
        """Evaluate (env, settings, policy, replication, seed) cells; result order follows input order"""
        iterator = tqdm(cells, desc="cells", disable=not self.progress)
        return Parallel(n_jobs=self.config.n_jobs)(delayed(run_cell)(*cell) for cell in iterator)

    def _manifest(self, command: str, seeds: List[int], results: List[CellResult]) -> Dict[str, Any]:
        return {
            "command": command,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "config": self.config.to_dict(),
            "replication_seeds": seeds,
            "cells": [
                {"policy": r.policy, "replication": r.replication, "seed": r.seed,
                 "final_regret": r.final_regret, "detections": len(r.detections),
                 "wall_clock": round(r.wall_clock, 3), **r.extras}
                for r in results
            ],
        }

    def _audit(self, trace: EnvironmentTrace, settings: PolicySettings) -> Dict[str, Any]:
        """Detectability of the trace's changes at twice the detector's noise half-width"""
        delta = 2.0 * epsilon(settings.detector_config())
        if trace.n_changes == 0:
            return {"delta": delta, "changes": 0}
        rho = audit_assumption1(trace, delta)["rho"]
        return {"delta": delta, "changes": int(rho.size), "mean_rho": float(rho.mean()),
                "min_rho": float(rho.min())}

    @staticmethod
    def _detections_frame(results: List[CellResult]) -> pd.DataFrame:
        rows = [{"policy": r.policy, "seed": r.seed, "user": user, "round": t}
                for r in results if r.policy in DETECTING_POLICIES for user, t in r.detections]
        return pd.DataFrame(rows, columns=DETECTION_COLUMNS)

    def run_experiment(self) -> Dict[str, Any]:
        """
        Run every configured policy on every replication of one environment

        Returns:
            Dictionary with success flag, run directory and summary frame
        """
        try:
            config = self.config
            env = config.env
            settings = config.policy_settings(env)
            seeds = replication_seeds(config.seed, config.replications)
            logger.info("simulate: %d replications x %d policies, setting %s",
                        len(seeds), len(config.policies), env.setting)
            results = self._run_cells([(env, settings, name, rep, seed)
                                       for rep, seed in enumerate(seeds) for name in config.policies])
            summary = summarize(results, config.policies)

            with self.store.open_run("simulate") as run:
                audits = []
                for rep, seed in enumerate(seeds):
                    trace = generate_trace(env, trace_rng(seed))
                    export_trace(trace, run.path(f"trace_rep{rep}.jsonl"))
                    audits.append({"replication": rep, **self._audit(trace, settings)})
                run.write_frame("regret.csv", pd.concat([r.regret for r in results], ignore_index=True))
                run.write_frame("detections.csv", self._detections_frame(results))
                run.write_frame("summary.csv", summary)
                manifest = self._manifest("simulate", seeds, results)
                manifest["assumption_audit"] = audits
                run.write_manifest(manifest)
            return {"success": True, "run_dir": str(run.final), "summary": summary}
        except (CodbandError, OSError) as e:
            logger.error("simulate failed: %s", e)
            return {"success": False, "error": str(e)}

    def run_table_grid(self) -> Dict[str, Any]:
        """
        Run the configured policies over every grid row

        Returns:
            Dictionary with success flag, run directory and the grid summary
        """
        try:
            config = self.config
            rows = grid_rows(config)
            cells, seeds_by_row = [], []
            for index, row in enumerate(rows):
                env = row.apply(config.env)
                settings = config.policy_settings(env)
                seeds = replication_seeds([config.seed, index], config.replications)
                seeds_by_row.append(seeds)
                cells.extend((env, settings, name, rep, seed)
                             for rep, seed in enumerate(seeds) for name in config.policies)
            logger.info("grid: %d rows, %d cells", len(rows), len(cells))
            results = self._run_cells(cells)

            per_row = len(config.policies) * config.replications
            frames, regrets = [], []
            for index in range(len(rows)):
                chunk = results[index * per_row:(index + 1) * per_row]
                summary = summarize(chunk, config.policies)
                summary.insert(0, "grid_row", index + 1)
                frames.append(summary)
                for r in chunk:
                    regrets.append(r.regret.assign(grid_row=index + 1))
            grid = pd.concat(frames, ignore_index=True)[GRID_COLUMNS]

            with self.store.open_run("grid") as run:
                run.write_frame("grid_summary.csv", grid)
                run.write_frame("grid_regret.csv", pd.concat(regrets, ignore_index=True))
                run.write_frame("detections.csv", self._detections_frame(results))
                manifest = self._manifest("grid", [s for seeds in seeds_by_row for s in seeds], results)
                manifest["grid_rows"] = [dict(asdict(row), grid_row=i + 1) for i, row in enumerate(rows)]
                run.write_manifest(manifest)
            return {"success": True, "run_dir": str(run.final), "summary": grid}
        except (CodbandError, OSError) as e:
            logger.error("grid failed: %s", e)
            return {"success": False, "error": str(e)}

    def run_replay(self, log_path) -> Dict[str, Any]:
        """
        Replay a uniform-random event log through each configured policy

        The random policy always runs as the normalization baseline. Policies
        needing ground truth are skipped.

        Args:
            log_path: Event log file

        Returns:
            Dictionary with success flag, run directory and the replay summary
        """
        try:
            config = self.config
            records = read_event_log(log_path)
            if not records:
                raise EventLogFormatError(f"event log {log_path} holds no records", 2)
            dim = records[0].candidates.shape[1]
            settings = config.policy_settings(config.env)
            names = list(dict.fromkeys(list(config.policies) + ["random"]))
            seeds = replication_seeds(config.seed, config.replications)
            logger.info("replay: %d events, %d policies, %d replications",
                        len(records), len(names), len(seeds))

            summary_rows, series = [], []
            for rep, seed in enumerate(seeds):
                results = {}
                for name in names:
                    policy = build_policy(name, dim, settings, policy_rng(seed, name))
                    try:
                        results[name] = replay(policy, records)
                    except UnsupportedOperationError as e:
                        logger.warning("skipping %s: %s", name, e)
                baseline = results["random"]
                for name, result in results.items():
                    ratio = normalized_reward(result, baseline)
                    summary_rows.append({
                        "policy": name, "replication": rep, "seed": seed, "matched": result.matched,
                        "total": result.total, "total_reward": result.total_reward,
                        "reward_rate": result.reward_rate, "match_rate": result.match_rate,
                        "normalized_reward": float(ratio[-1]),
                    })
                    series.append(pd.DataFrame({"policy": name, "replication": rep,
                                                "event": np.arange(ratio.size), "normalized_reward": ratio}))
            summary = pd.DataFrame(summary_rows)

            with self.store.open_run("replay") as run:
                run.write_frame("replay_summary.csv", summary)
                run.write_frame("replay_normalized.csv", pd.concat(series, ignore_index=True))
                run.write_manifest({
                    "command": "replay",
                    "created_at": datetime.now(timezone.utc).isoformat(),
                    "config": config.to_dict(),
                    "event_log": str(Path(log_path)),
                    "events": len(records),
                    "replication_seeds": seeds,
                })
            return {"success": True, "run_dir": str(run.final), "summary": summary}
        except (CodbandError, OSError) as e:
            logger.error("replay failed: %s", e)
            return {"success": False, "error": str(e)}

    def generate_log(self, rounds: Optional[int] = None) -> Dict[str, Any]:
        """
        Log uniform-random interactions on the first replication's environment

        Args:
            rounds: Rounds to log, defaults to the horizon

        Returns:
            Dictionary with success flag, log path and event count
        """
        try:
            config = self.config
            seed = replication_seeds(config.seed, 1)[0]
            trace = generate_trace(config.env, trace_rng(seed))
            records = log_uniform_events(trace, log_rng(seed), rounds)
            with self.store.open_run("gen-log") as run:
                count = write_event_log(records, run.path("events.log"))
                export_trace(trace, run.path("trace.jsonl"))
                run.write_manifest({
                    "command": "gen-log",
                    "created_at": datetime.now(timezone.utc).isoformat(),
                    "config": config.to_dict(),
                    "seed": seed,
                    "events": count,
                })
            logger.info("logged %d events", count)
            return {"success": True, "path": str(run.final / "events.log"), "events": count}
        except (CodbandError, OSError) as e:
            logger.error("gen-log failed: %s", e)
            return {"success": False, "error": str(e)}
