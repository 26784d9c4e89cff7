"""
Policy Contract
Decision record, per-user detector state, shared hyperparameters and the
choose/feedback interface every bandit policy implements
"""

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Hashable, Iterable, List, Optional

import numpy as np
from numpy.typing import NDArray

from codband.errors import DimensionMismatchError, ParameterError
from codband.models.bayes_linear import NORM_TOLERANCE, Observation, RidgeStatistics
from codband.models.change_detect import (
    DetectorConfig,
    DetectorState,
    push_and_check,
    recommended_tau,
    test_bit,
)


@dataclass
class Decision:
    """Chosen arm plus diagnostics of how it was chosen"""

    arm_index: int
    model_key: Optional[int] = None
    theta: Optional[NDArray[np.float64]] = None
    detected: bool = False


@dataclass
class PolicySettings:
    ridge: float = 1.0
    noise_sd: float = 0.1
    delta1: float = 0.05
    delta2: float = 0.05
    window: Optional[int] = None
    tau_rho: float = 0.5
    gamma_a: float = 1.0
    gamma_b: float = 1.0
    alpha0: Optional[float] = None
    gibbs_every: int = 1

    def __post_init__(self):
        if self.gibbs_every < 1:
            raise ParameterError(f"gibbs_every must be at least 1, got {self.gibbs_every}")
        if self.alpha0 is not None and not self.alpha0 > 0:
            raise ParameterError(f"alpha0 must be positive, got {self.alpha0}")

    @property
    def resolved_window(self) -> int:
        """Configured window, or the smallest one with detection power at tau_rho"""
        if self.window is not None:
            return int(self.window)
        return recommended_tau(self.tau_rho, self.delta1, self.delta2)

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(delta1=self.delta1, delta2=self.delta2, window=self.resolved_window,
                              ridge=self.ridge, noise_sd=self.noise_sd)


@dataclass(eq=False)
class UserState:
    """
    Everything a detecting policy keeps per user

    The dataset holds the observations since the last detection and the
    ridge statistics mirror it for the badness test.
    """

    dim: int
    ridge: float
    window: int
    dataset: List[Observation] = field(default_factory=list)
    stats: RidgeStatistics = field(init=False)
    detector: DetectorState = field(init=False)
    model_key: Optional[int] = None
    # prior draw made at choose time, committed to the pool at feedback
    proposed_key: Optional[int] = None
    has_proposal: bool = False
    pending_detected: bool = False
    detections: int = 0
    interactions: int = 0

    def __post_init__(self):
        self.stats = RidgeStatistics(self.dim, self.ridge)
        self.detector = DetectorState(self.window)

    def badness(self, context: NDArray[np.float64], reward: float, config: DetectorConfig) -> int:
        """Test bit of a new observation against the estimator of the current dataset"""
        predicted = float(context @ self.stats.estimate())
        cb = float(self.stats.confidence_bounds(context, config.noise_sd, config.delta1)[0])
        return test_bit(predicted, reward, cb, config)

    def record(self, obs: Observation):
        self.dataset.append(obs)
        self.stats.add(obs.context, obs.reward)
        self.interactions += 1

    def check(self, bit: int, config: DetectorConfig) -> bool:
        """Push a test bit; on detection empty the dataset and detector window"""
        if not push_and_check(self.detector, bit, config):
            return False
        self.dataset = []
        self.stats.reset()
        self.detector.reset()
        self.model_key = None
        self.pending_detected = True
        self.detections += 1
        return True


def check_candidates(candidates, dim: int) -> NDArray[np.float64]:
    """Validate a round's candidate matrix: nonempty, one row per arm, norms at most one"""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if candidates.ndim != 2 or candidates.shape[0] == 0:
        raise ParameterError("candidate list must be a nonempty 2-d array")
    if candidates.shape[1] != dim:
        raise DimensionMismatchError(f"candidates have dimension {candidates.shape[1]}, expected {dim}")
    if np.any(np.linalg.norm(candidates, axis=1) > 1.0 + NORM_TOLERANCE):
        raise ParameterError("candidate contexts must have norm at most 1")
    return candidates


def select_arm(scores: NDArray[np.float64]) -> int:
    """argmax with ties to the lowest index"""
    return int(np.argmax(scores))


class Policy(ABC):
    """
    A bandit policy serving many users

    choose is called once per round for a user and feedback delivers the
    reward of the chosen context before that user's next round. Replay may
    call choose without feedback; such calls must not change learned state.
    """

    name: str = ""

    def __init__(self, dim: int, rng: np.random.Generator):
        if dim < 1:
            raise ParameterError(f"dimension must be at least 1, got {dim}")
        self.dim = int(dim)
        self.rng = rng

    @abstractmethod
    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        """Pick one of the candidates for user; truth is the ground-truth model id when known"""

    @abstractmethod
    def feedback(self, user: Hashable, context, reward: float) -> bool:
        """Deliver the reward of the chosen context; returns True when a change was detected"""

    def _state_arrays(self) -> Iterable:
        return ()

    def state_digest(self) -> str:
        """Hash of the learned state, excluding the random stream"""
        digest = hashlib.sha256(self.name.encode())
        for item in self._state_arrays():
            if isinstance(item, np.ndarray):
                digest.update(np.ascontiguousarray(item).tobytes())
            else:
                digest.update(repr(item).encode())
        return digest.hexdigest()
