"""
Change-Point Detection
Per-user badness test bits, a sliding-window mean and its Hoeffding threshold
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque

from scipy.special import erfinv

from codband.errors import InfeasibleParameterError, ParameterError


def recommended_tau(rho: float, delta1: float, delta2: float) -> int:
    """
    Smallest window length guaranteeing detection power

    Args:
        rho: Fraction of arms whose expected reward jumps at a change
        delta1: Per-round test failure probability
        delta2: Detection failure probability

    Returns:
        ceil(2*ln(2/delta2) / (rho*(1-delta1) - delta1)^2)
    """
    gap = rho * (1.0 - delta1) - delta1
    if gap <= 0:
        raise InfeasibleParameterError(
            f"rho={rho} is too small for delta1={delta1}: need rho*(1-delta1) > delta1")
    return int(math.ceil(2.0 * math.log(2.0 / delta2) / gap ** 2))


@dataclass(frozen=True)
class DetectorConfig:
    delta1: float = 0.05
    delta2: float = 0.05
    window: int = 50
    ridge: float = 1.0
    noise_sd: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.delta1 < 1.0:
            raise ParameterError(f"delta1 must lie in (0, 1), got {self.delta1}")
        if not 0.0 < self.delta2 < 1.0:
            raise ParameterError(f"delta2 must lie in (0, 1), got {self.delta2}")
        if self.window < 1:
            raise ParameterError(f"window must be at least 1, got {self.window}")
        if not self.ridge > 0:
            raise ParameterError(f"ridge must be positive, got {self.ridge}")
        if self.noise_sd < 0:
            raise ParameterError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if self.threshold >= 1.0:
            raise ParameterError(
                f"detection threshold {self.threshold:.4f} is not below 1; increase window or delta2")

    @property
    def threshold(self) -> float:
        return self.delta1 + math.sqrt(math.log(1.0 / self.delta2) / (2.0 * self.window))

    @property
    def epsilon(self) -> float:
        return epsilon(self)

    def recommended_tau(self, rho: float) -> int:
        return recommended_tau(rho, self.delta1, self.delta2)


def epsilon(config: DetectorConfig) -> float:
    """Two-sided (1 - delta1) Gaussian noise half-width: sqrt(2)*sigma*erfinv(1 - delta1)"""
    return math.sqrt(2.0) * config.noise_sd * float(erfinv(1.0 - config.delta1))


def test_bit(predicted: float, observed: float, cb: float, config: DetectorConfig) -> int:
    """1 iff |predicted - observed| > cb + epsilon"""
    if cb < 0:
        raise ParameterError(f"confidence bound must be nonnegative, got {cb}")
    return int(abs(predicted - observed) > cb + config.epsilon)


test_bit.__test__ = False


@dataclass
class DetectorState:
    """The window of most recent test bits and their running sum"""

    window: int
    bits: Deque[int] = field(init=False)
    ones: int = field(init=False, default=0)

    def __post_init__(self):
        self.bits = deque(maxlen=self.window)

    @property
    def window_mean(self) -> float:
        return self.ones / len(self.bits) if self.bits else 0.0

    def push(self, bit: int):
        if len(self.bits) == self.window:
            self.ones -= self.bits[0]
        self.bits.append(int(bit))
        self.ones += int(bit)

    def reset(self):
        self.bits.clear()
        self.ones = 0


def push_and_check(state: DetectorState, bit: int, config: DetectorConfig) -> bool:
    """
    Append a test bit and compare the window mean with the threshold

    Args:
        state: Detector state of one user
        bit: New test bit
        config: Detector configuration

    Returns:
        True when a change is detected; the caller resets the state
    """
    state.push(bit)
    return state.window_mean > config.threshold
