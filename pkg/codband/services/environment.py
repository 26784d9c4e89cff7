"""
Synthetic Environment Service
Abruptly changing multi-user linear environments: asynchronous per-user
change points, ground-truth parameter generation, reward emission, the
detectability audit and the uniform-random event logger
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from codband.errors import ConfigError, ParameterError
from codband.services.evaluation import EventLogRecord

logger = logging.getLogger(__name__)

SETTINGS = ("dp", "mixture", "stationary")


@dataclass(frozen=True)
class EnvConfig:
    n_users: int = 20
    horizon: int = 1000
    dim: int = 10
    pool_size: int = 1000
    candidates_per_round: int = 25
    s_min: int = 167
    s_max: int = 1000
    noise_sd: float = 0.1
    setting: str = "mixture"
    n_models: int = 10
    mixture_weights: Optional[Tuple[float, ...]] = None
    dp_alpha: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("n_users", "horizon", "dim", "pool_size", "candidates_per_round", "s_min"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.s_max < self.s_min:
            raise ConfigError(f"s_max ({self.s_max}) is below s_min ({self.s_min})")
        if self.candidates_per_round > self.pool_size:
            raise ConfigError(
                f"candidates_per_round ({self.candidates_per_round}) exceeds pool_size ({self.pool_size})")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {', '.join(SETTINGS)}, got {self.setting!r}")
        if self.setting == "dp":
            if self.n_models < 0 or not self.dp_alpha > 0:
                raise ConfigError("dp setting needs n_models >= 0 and dp_alpha > 0")
        elif self.n_models < 1:
            raise ConfigError(f"{self.setting} setting needs at least one model")
        if self.mixture_weights is not None:
            weights = np.asarray(self.mixture_weights, dtype=np.float64)
            if weights.shape != (self.n_models,) or np.any(weights < 0) or not weights.sum() > 0:
                raise ConfigError(
                    f"mixture_weights must be {self.n_models} nonnegative values with a positive sum")

    @property
    def weights(self) -> NDArray[np.float64]:
        if self.mixture_weights is None:
            return np.full(self.n_models, 1.0 / self.n_models)
        weights = np.asarray(self.mixture_weights, dtype=np.float64)
        return weights / weights.sum()


@dataclass(frozen=True, eq=False)
class EnvironmentTrace:
    """
    Ground truth of one simulated run

    change_points[u] starts at 0 and lists the rounds at which user u's
    parameter switches; thetas[u][i] and model_ids[u][i] hold the parameter
    and its global model id for the period starting at change_points[u][i].
    """

    config: EnvConfig
    arms: NDArray[np.float64]
    change_points: List[NDArray[np.int64]]
    thetas: List[NDArray[np.float64]]
    model_ids: List[NDArray[np.int64]]

    @property
    def n_users(self) -> int:
        return len(self.change_points)

    @property
    def n_changes(self) -> int:
        return sum(len(cp) - 1 for cp in self.change_points)

    def period_index(self, user: int, t: int) -> int:
        return int(np.searchsorted(self.change_points[user], t, side="right") - 1)

    def theta(self, user: int, t: int) -> NDArray[np.float64]:
        return self.thetas[user][self.period_index(user, t)]

    def model_id(self, user: int, t: int) -> int:
        return int(self.model_ids[user][self.period_index(user, t)])

    def segments(self, user: int) -> List[Tuple[int, int]]:
        """Half-open [start, end) round ranges of the user's stationary periods"""
        bounds = list(self.change_points[user]) + [self.config.horizon]
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(bounds) - 1)]


@dataclass
class RoundOutcome:
    """Candidates served to one user in one round together with their ground truth"""

    candidates: NDArray[np.float64]
    expected_rewards: NDArray[np.float64]
    noise: float
    model_id: int
    pool_indices: NDArray[np.int64] = field(repr=False)

    @property
    def best_expected_reward(self) -> float:
        return float(self.expected_rewards.max())

    def reward_for(self, arm_index: int) -> float:
        """Noisy reward the environment emits for the chosen candidate"""
        return float(self.expected_rewards[arm_index] + self.noise)

    def regret_for(self, arm_index: int) -> float:
        return self.best_expected_reward - float(self.expected_rewards[arm_index])


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> NDArray[np.float64]:
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _draw_change_points(config: EnvConfig, rng: np.random.Generator) -> NDArray[np.int64]:
    points = [0]
    while True:
        nxt = points[-1] + int(rng.integers(config.s_min, config.s_max + 1))
        if nxt >= config.horizon:
            return np.asarray(points, dtype=np.int64)
        points.append(nxt)


def _crp_parameters(config: EnvConfig, base: NDArray[np.float64],
                    change_points: List[NDArray[np.int64]],
                    rng: np.random.Generator) -> Tuple[List[NDArray[np.float64]], List[NDArray[np.int64]]]:
    """Draw every period's parameter by the CRP rule, visiting periods in time order"""
    params = [row for row in base]
    counts = [1.0] * len(params)
    ids = [np.empty(len(cp), dtype=np.int64) for cp in change_points]
    order = sorted((int(start), user, i)
                   for user, cp in enumerate(change_points) for i, start in enumerate(cp))
    for _, user, i in order:
        weights = np.asarray(counts + [config.dp_alpha])
        k = int(rng.choice(len(weights), p=weights / weights.sum()))
        if k == len(params):
            theta = rng.standard_normal(config.dim)
            params.append(theta / max(1.0, float(np.linalg.norm(theta))))
            counts.append(0.0)
        counts[k] += 1.0
        ids[user][i] = k
    table = np.asarray(params).reshape(len(params), config.dim)
    return [table[user_ids] for user_ids in ids], ids


def generate_trace(config: EnvConfig, rng: Optional[np.random.Generator] = None) -> EnvironmentTrace:
    """
    Draw the arm pool, per-user change points and the parameter of every period

    Args:
        config: Environment configuration
        rng: Random stream; defaults to one seeded with config.seed

    Returns:
        Immutable EnvironmentTrace
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    radii = rng.uniform(0.0, 1.0, config.pool_size)
    arms = _unit_rows(rng, config.pool_size, config.dim) * radii[:, None]
    base = _unit_rows(rng, config.n_models, config.dim)

    if config.setting == "stationary":
        change_points = [np.zeros(1, dtype=np.int64) for _ in range(config.n_users)]
    else:
        change_points = [_draw_change_points(config, rng) for _ in range(config.n_users)]

    if config.setting == "dp":
        thetas, model_ids = _crp_parameters(config, base, change_points, rng)
    else:
        model_ids = [rng.choice(config.n_models, size=len(cp), p=config.weights).astype(np.int64)
                     for cp in change_points]
        thetas = [base[ids] for ids in model_ids]

    trace = EnvironmentTrace(config, arms, change_points, thetas, model_ids)
    logger.debug("generated %s trace: %d users, %d change points, %d distinct models",
                 config.setting, trace.n_users, trace.n_changes,
                 len(np.unique(np.concatenate(model_ids))))
    return trace


def serve_round(trace: EnvironmentTrace, t: int, user: int, rng: np.random.Generator) -> RoundOutcome:
    """
    Sample the candidates of one round and pre-draw the reward noise

    Args:
        trace: Ground truth
        t: Global round in [0, horizon)
        user: User served
        rng: Serving stream

    Returns:
        RoundOutcome with expected rewards of every candidate
    """
    config = trace.config
    if not 0 <= t < config.horizon:
        raise ParameterError(f"round {t} outside [0, {config.horizon})")
    indices = rng.choice(config.pool_size, size=config.candidates_per_round, replace=False)
    candidates = trace.arms[indices]
    expected = candidates @ trace.theta(user, t)
    noise = float(rng.normal(0.0, config.noise_sd))
    return RoundOutcome(candidates, expected, noise, trace.model_id(user, t), indices)


def audit_assumption1(trace: EnvironmentTrace, delta: float) -> pd.DataFrame:
    """
    Fraction of pool arms whose expected reward jumps by more than delta at each change

    Args:
        trace: Ground truth with at least one change point
        delta: Jump threshold

    Returns:
        DataFrame with columns user, change_round, rho
    """
    if trace.n_changes == 0:
        raise ParameterError("trace has no change points to audit")
    rows = []
    for user, cp in enumerate(trace.change_points):
        for i in range(1, len(cp)):
            jump = np.abs(trace.arms @ (trace.thetas[user][i] - trace.thetas[user][i - 1]))
            rows.append({"user": user, "change_round": int(cp[i]), "rho": float(np.mean(jump > delta))})
    return pd.DataFrame(rows, columns=["user", "change_round", "rho"])


def trace_frame(trace: EnvironmentTrace) -> pd.DataFrame:
    """One row per user period: user, start_round, model_id, theta"""
    rows = [
        {"user": user, "start_round": int(start), "model_id": int(trace.model_ids[user][i]),
         "theta": trace.thetas[user][i].tolist()}
        for user, cp in enumerate(trace.change_points) for i, start in enumerate(cp)
    ]
    return pd.DataFrame(rows, columns=["user", "start_round", "model_id", "theta"])


def export_trace(trace: EnvironmentTrace, path) -> None:
    """Write the per-period ground truth as JSON lines"""
    trace_frame(trace).to_json(path, orient="records", lines=True, double_precision=15)


def log_uniform_events(trace: EnvironmentTrace, rng: np.random.Generator,
                       horizon: Optional[int] = None) -> List[EventLogRecord]:
    """
    Serve every user round-robin and log a uniformly random arm with its reward

    Args:
        trace: Ground truth
        rng: Stream for candidates, noise and the logged choice
        horizon: Number of rounds to log, at most the trace horizon

    Returns:
        EventLogRecords in serving order
    """
    horizon = trace.config.horizon if horizon is None else min(horizon, trace.config.horizon)
    records = []
    for t in range(horizon):
        for user in range(trace.n_users):
            outcome = serve_round(trace, t, user, rng)
            arm = int(rng.integers(outcome.candidates.shape[0]))
            records.append(EventLogRecord(t, user, outcome.candidates, arm, outcome.reward_for(arm)))
    return records
