"""
Per-User Thompson Sampling
Plain Bayesian linear Thompson sampling per user, and the restart variant that
runs the change detector and returns a user's posterior to the prior when it
fires
"""

import logging
from typing import Dict, Hashable, Iterable, Optional

import numpy as np

from codband.models.bayes_linear import LinearPosterior, Observation, as_context
from codband.policies.base import (
    Decision,
    Policy,
    PolicySettings,
    UserState,
    check_candidates,
    select_arm,
)

logger = logging.getLogger(__name__)


class ThompsonPolicy(Policy):
    name = "thompson"

    def __init__(self, dim: int, settings: PolicySettings, rng: np.random.Generator):
        super().__init__(dim, rng)
        self.settings = settings
        self.posteriors: Dict[Hashable, LinearPosterior] = {}
        self._prior = LinearPosterior(dim, settings.ridge, settings.noise_sd)

    def _posterior(self, user: Hashable) -> LinearPosterior:
        posterior = self.posteriors.get(user)
        if posterior is None:
            posterior = self.posteriors[user] = LinearPosterior(
                self.dim, self.settings.ridge, self.settings.noise_sd)
        return posterior

    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        candidates = check_candidates(candidates, self.dim)
        theta = self.posteriors.get(user, self._prior).sample(self.rng)
        return Decision(select_arm(candidates @ theta), theta=theta)

    def feedback(self, user: Hashable, context, reward: float) -> bool:
        self._posterior(user).absorb(Observation(as_context(context, self.dim), float(reward)))
        return False

    def _state_arrays(self) -> Iterable:
        for user, posterior in self.posteriors.items():
            yield (user, posterior.n_obs)
            yield posterior.precision
            yield posterior.moment


class RestartThompsonPolicy(ThompsonPolicy):
    """Per-user Thompson sampling that forgets everything about a user on detection"""

    name = "restart_ts"

    def __init__(self, dim: int, settings: PolicySettings, rng: np.random.Generator):
        super().__init__(dim, settings, rng)
        self.config = settings.detector_config()
        self.users: Dict[Hashable, UserState] = {}

    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        decision = super().choose(user, candidates, truth)
        state = self.users.get(user)
        if state is not None:
            decision.detected, state.pending_detected = state.pending_detected, False
        return decision

    def feedback(self, user: Hashable, context, reward: float) -> bool:
        context = as_context(context, self.dim)
        state = self.users.get(user)
        if state is None:
            state = self.users[user] = UserState(self.dim, self.settings.ridge, self.config.window)
        bit = state.badness(context, reward, self.config)
        obs = Observation(context, float(reward))
        state.record(obs)
        posterior = self._posterior(user)
        posterior.absorb(obs)
        if state.check(bit, self.config):
            posterior.reset()
            logger.debug("change detected for user %s, posterior back at the prior", user)
            return True
        return False

    def _state_arrays(self) -> Iterable:
        yield from super()._state_arrays()
        for user, state in self.users.items():
            yield (user, state.interactions, tuple(state.detector.bits))
