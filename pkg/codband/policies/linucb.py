"""
LinUCB Baseline
One ridge-regression model per user with an upper-confidence-bound arm rule
"""

from typing import Dict, Hashable, Iterable, Optional

import numpy as np
from numpy.typing import NDArray

from codband.models.bayes_linear import RidgeStatistics, as_context
from codband.policies.base import Decision, Policy, PolicySettings, check_candidates, select_arm


class LinUCBPolicy(Policy):
    name = "linucb"

    def __init__(self, dim: int, settings: PolicySettings, rng: np.random.Generator):
        super().__init__(dim, rng)
        self.settings = settings
        self.models: Dict[Hashable, RidgeStatistics] = {}

    def _route(self, user: Hashable, truth: Optional[int]) -> Hashable:
        """Key of the model serving this round"""
        return user

    def _feedback_key(self, user: Hashable) -> Hashable:
        return user

    def scores(self, key: Hashable, candidates: NDArray[np.float64]) -> NDArray[np.float64]:
        """Ridge prediction plus confidence half-width of every candidate"""
        stats = self.models.get(key) or RidgeStatistics(self.dim, self.settings.ridge)
        return candidates @ stats.estimate() + stats.confidence_bounds(
            candidates, self.settings.noise_sd, self.settings.delta1)

    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        candidates = check_candidates(candidates, self.dim)
        key = self._route(user, truth)
        return Decision(select_arm(self.scores(key, candidates)))

    def feedback(self, user: Hashable, context, reward: float) -> bool:
        key = self._feedback_key(user)
        stats = self.models.get(key)
        if stats is None:
            stats = self.models[key] = RidgeStatistics(self.dim, self.settings.ridge)
        stats.add(as_context(context, self.dim), float(reward))
        return False

    def _state_arrays(self) -> Iterable:
        for key, stats in self.models.items():
            yield (key, stats.count)
            yield stats.gram
            yield stats.xty
