"""
Uniform Random Policy
Used to log replay data and as the normalized-reward denominator
"""

from typing import Hashable, Optional

import numpy as np

from codband.policies.base import Decision, Policy, PolicySettings, check_candidates


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, dim: int, settings: Optional[PolicySettings], rng: np.random.Generator):
        super().__init__(dim, rng)

    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        candidates = check_candidates(candidates, self.dim)
        return Decision(int(self.rng.integers(candidates.shape[0])))

    def feedback(self, user: Hashable, context, reward: float) -> bool:
        return False
