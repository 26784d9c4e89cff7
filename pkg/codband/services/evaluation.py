"""
Evaluation Service
Pseudo-regret curves, the uniform-random event log format, offline replay and
reward normalization against the random policy
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Iterator, List, Union

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from codband.errors import ConfigError, EventLogFormatError, ParameterError

logger = logging.getLogger(__name__)

EVENT_LOG_MAGIC = "# codband-event-log v1"
REGRET_COLUMNS = ["policy", "seed", "round", "instantaneous_regret", "cumulative_regret"]


@dataclass
class RegretCurve:
    """Per-interaction pseudo-regret and realized reward of one policy on one replication"""

    policy: str
    seed: int
    rounds: List[int] = field(default_factory=list)
    users: List[Hashable] = field(default_factory=list)
    regrets: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)

    def record_regret(self, outcome, decision, t: int = None, user: Hashable = None) -> float:
        """
        Append the gap between the best and the chosen expected reward

        Args:
            outcome: RoundOutcome carrying ground-truth expected rewards
            decision: Decision of the policy
            t: Round index, defaults to the number of recorded interactions
            user: User served

        Returns:
            The instantaneous regret
        """
        regret = outcome.regret_for(decision.arm_index)
        self.rounds.append(len(self.rounds) if t is None else int(t))
        self.users.append(user)
        self.regrets.append(regret)
        self.rewards.append(outcome.reward_for(decision.arm_index))
        return regret

    @property
    def instantaneous(self) -> NDArray[np.float64]:
        return np.asarray(self.regrets, dtype=np.float64)

    @property
    def cumulative(self) -> NDArray[np.float64]:
        return np.cumsum(self.instantaneous)

    @property
    def cumulative_rewards(self) -> NDArray[np.float64]:
        return np.cumsum(np.asarray(self.rewards, dtype=np.float64))

    @property
    def final_regret(self) -> float:
        return float(self.instantaneous.sum())

    def to_frame(self) -> pd.DataFrame:
        """Regret summed over the users served in each round, with its running total"""
        frame = pd.DataFrame({"round": self.rounds, "instantaneous_regret": self.regrets})
        per_round = frame.groupby("round", sort=True, as_index=False)["instantaneous_regret"].sum()
        per_round["cumulative_regret"] = per_round["instantaneous_regret"].cumsum()
        per_round.insert(0, "seed", self.seed)
        per_round.insert(0, "policy", self.policy)
        return per_round[REGRET_COLUMNS]


@dataclass(frozen=True, eq=False)
class EventLogRecord:
    """One logged interaction: round, user, candidate matrix, logged arm and reward"""

    round: int
    user: Hashable
    candidates: NDArray[np.float64]
    logged_arm: int
    reward: float

    def __post_init__(self):
        candidates = np.atleast_2d(np.asarray(self.candidates, dtype=np.float64))
        object.__setattr__(self, "candidates", candidates)
        if not 0 <= self.logged_arm < candidates.shape[0]:
            raise ParameterError(
                f"logged arm {self.logged_arm} outside candidate count {candidates.shape[0]}")


def write_event_log(records: Iterable[EventLogRecord], path: Union[str, Path]) -> int:
    """
    Write records as text: a header declaring d and the candidate count, then
    one comma-separated record per line with features flattened row-major

    Returns:
        Number of records written
    """
    records = list(records)
    if not records:
        raise ParameterError("cannot write an empty event log")
    n_candidates, dim = records[0].candidates.shape
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{EVENT_LOG_MAGIC} d={dim} candidates={n_candidates}\n")
        for rec in records:
            if rec.candidates.shape != (n_candidates, dim):
                raise ConfigError("event log records must share one candidate count and dimension")
            fields = [str(rec.round), str(rec.user), str(rec.logged_arm), repr(float(rec.reward))]
            fields.extend(repr(float(v)) for v in rec.candidates.ravel())
            f.write(",".join(fields) + "\n")
    return len(records)


def _parse_header(line: str):
    parts = line.strip().split()
    try:
        if " ".join(parts[:3]) != EVENT_LOG_MAGIC:
            raise ValueError
        dim = int(parts[3].removeprefix("d="))
        n_candidates = int(parts[4].removeprefix("candidates="))
    except (ValueError, IndexError):
        raise EventLogFormatError(f"expected header '{EVENT_LOG_MAGIC} d=<d> candidates=<m>'", 1) from None
    if dim < 1 or n_candidates < 1:
        raise EventLogFormatError("header declares a non-positive size", 1)
    return dim, n_candidates


def _parse_user(text: str) -> Hashable:
    try:
        return int(text)
    except ValueError:
        return text


def iter_event_log(path: Union[str, Path]) -> Iterator[EventLogRecord]:
    """Stream records from an event log, raising EventLogFormatError with the offending line"""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if not header:
            raise EventLogFormatError("empty event log", 1)
        dim, n_candidates = _parse_header(header)
        expected = 4 + dim * n_candidates
        for line_number, line in enumerate(f, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(",")
            if len(fields) != expected:
                raise EventLogFormatError(f"expected {expected} fields, found {len(fields)}", line_number)
            try:
                values = np.array([float(v) for v in fields[4:]], dtype=np.float64)
                record = EventLogRecord(int(fields[0]), _parse_user(fields[1]),
                                        values.reshape(n_candidates, dim), int(fields[2]), float(fields[3]))
            except (ValueError, ParameterError) as e:
                raise EventLogFormatError(str(e), line_number) from None
            if not np.isfinite(record.reward) or not np.all(np.isfinite(values)):
                raise EventLogFormatError("non-finite value", line_number)
            yield record


def read_event_log(path: Union[str, Path]) -> List[EventLogRecord]:
    return list(iter_event_log(path))


@dataclass
class ReplayResult:
    policy: str
    matched: int
    total: int
    total_reward: float
    cumulative_rewards: NDArray[np.float64]

    @property
    def reward_rate(self) -> float:
        """Mean reward over matched events, nan when nothing matched"""
        return self.total_reward / self.matched if self.matched else float("nan")

    @property
    def match_rate(self) -> float:
        return self.matched / self.total if self.total else float("nan")


def replay(policy, records: Iterable[EventLogRecord]) -> ReplayResult:
    """
    Exact-match offline evaluation on uniformly logged events

    The policy chooses among each record's candidates; only when it picks the
    logged arm does it receive the logged reward. Other records are skipped
    without feedback.

    Args:
        policy: Policy to evaluate
        records: Logged events in order

    Returns:
        ReplayResult with the cumulative matched reward after every event
    """
    n_candidates = None
    matched, total, total_reward = 0, 0, 0.0
    cumulative = []
    for rec in records:
        if n_candidates is None:
            n_candidates = rec.candidates.shape[0]
        elif rec.candidates.shape[0] != n_candidates:
            raise ConfigError(
                f"record {total} has {rec.candidates.shape[0]} candidates, expected {n_candidates}")
        decision = policy.choose(rec.user, rec.candidates)
        total += 1
        if decision.arm_index == rec.logged_arm:
            policy.feedback(rec.user, rec.candidates[rec.logged_arm], rec.reward)
            matched += 1
            total_reward += rec.reward
        cumulative.append(total_reward)
    if matched == 0:
        logger.warning("replay of %s matched none of %d events", policy.name, total)
    return ReplayResult(policy.name, matched, total, total_reward, np.asarray(cumulative, dtype=np.float64))


def _cumulative_series(curve) -> NDArray[np.float64]:
    series = getattr(curve, "cumulative_rewards", curve)
    return np.asarray(series, dtype=np.float64)


def normalized_reward(policy_curve, random_curve) -> NDArray[np.float64]:
    """
    Elementwise ratio of cumulative rewards, nan where the random baseline is not positive

    Args:
        policy_curve: RegretCurve, ReplayResult or cumulative reward array
        random_curve: The same for the random policy over the same horizon

    Returns:
        Ratio series
    """
    num = _cumulative_series(policy_curve)
    den = _cumulative_series(random_curve)
    if num.shape != den.shape:
        raise ParameterError(f"curves cover different horizons: {num.shape} vs {den.shape}")
    ratio = np.full(num.shape, np.nan)
    positive = den > 0
    ratio[positive] = num[positive] / den[positive]
    return ratio


def summarize_segments(curve: RegretCurve, trace) -> pd.DataFrame:
    """
    Regret of the first and last half of every stationary segment (equal lengths;
    the middle round of an odd segment is left out)

    Args:
        curve: Curve recorded with round and user of every interaction
        trace: EnvironmentTrace the curve was recorded on

    Returns:
        DataFrame with columns user, start, end, first_half, second_half
    """
    frame = pd.DataFrame({"user": curve.users, "round": curve.rounds, "regret": curve.regrets})
    rows = []
    for user, user_frame in frame.groupby("user", sort=True):
        rounds = user_frame["round"].to_numpy()
        regrets = user_frame["regret"].to_numpy()
        for start, end in trace.segments(int(user)):
            if end - start < 2:
                continue
            half = (end - start) // 2
            rows.append({
                "user": user,
                "start": start,
                "end": end,
                "first_half": float(regrets[(rounds >= start) & (rounds < start + half)].sum()),
                "second_half": float(regrets[(rounds >= end - half) & (rounds < end)].sum()),
            })
    return pd.DataFrame(rows, columns=["user", "start", "end", "first_half", "second_half"])
