"""
Collaborative Dynamic Bandit Policy
Thompson sampling over a Dirichlet-process pool of shared linear models with
per-user change detection
"""

import logging
from typing import Dict, Hashable, Iterable, Optional

import numpy as np

from codband.errors import ProtocolError
from codband.models.bayes_linear import LinearPosterior, Observation, as_context
from codband.models.dp_pool import ModelPool
from codband.policies.base import (
    Decision,
    Policy,
    PolicySettings,
    UserState,
    check_candidates,
    select_arm,
)

logger = logging.getLogger(__name__)


class CoDBandPolicy(Policy):
    """
    Users are served by global models drawn from a shared pool. After a
    detected change a user starts an empty dataset and draws a model from
    the pool's prior again; observations from earlier periods stay with the
    models that absorbed them.
    """

    name = "codband"

    def __init__(self, dim: int, settings: PolicySettings, rng: np.random.Generator):
        super().__init__(dim, rng)
        self.settings = settings
        self.config = settings.detector_config()
        alpha0 = settings.alpha0
        if alpha0 is None:
            alpha0 = float(rng.gamma(settings.gamma_a, 1.0 / settings.gamma_b))
        self.pool = ModelPool(dim, settings.ridge, settings.noise_sd, alpha0,
                              settings.gamma_a, settings.gamma_b)
        self._prior = LinearPosterior(dim, settings.ridge, settings.noise_sd)
        self.users: Dict[Hashable, UserState] = {}

    def _user(self, user: Hashable) -> UserState:
        state = self.users.get(user)
        if state is None:
            state = UserState(self.dim, self.settings.ridge, self.config.window)
            self.users[user] = state
        return state

    def choose(self, user: Hashable, candidates, truth: Optional[int] = None) -> Decision:
        candidates = check_candidates(candidates, self.dim)
        state = self._user(user)
        if state.model_key is not None:
            key = state.model_key
            theta = self.pool.models[key].posterior.sample(self.rng)
        else:
            # tentative until feedback so unanswered rounds leave the pool alone
            key = self.pool.draw_prior_key(self.rng)
            state.proposed_key, state.has_proposal = key, True
            posterior = self._prior if key is None else self.pool.models[key].posterior
            theta = posterior.sample(self.rng)
        detected, state.pending_detected = state.pending_detected, False
        return Decision(select_arm(candidates @ theta), key, theta, detected)

    def feedback(self, user: Hashable, context, reward: float) -> bool:
        state = self.users.get(user)
        if state is None or (state.model_key is None and not state.has_proposal):
            raise ProtocolError(f"feedback for user {user!r} without a preceding choose")
        if state.model_key is None:
            # the proposed model may have been emptied by another user meanwhile
            proposed = state.proposed_key if state.proposed_key in self.pool.models else None
            state.model_key = self.pool.assign(proposed)
            state.proposed_key, state.has_proposal = None, False

        context = as_context(context, self.dim)
        bit = state.badness(context, reward, self.config)
        obs = Observation(context, float(reward))
        state.record(obs)
        self.pool.models[state.model_key].posterior.absorb(obs)
        if state.interactions % self.settings.gibbs_every == 0:
            state.model_key = self.pool.gibbs_reassign(user, state.model_key, state.dataset, self.rng)
        self.pool.resample_alpha0(self.pool.total_assignments, self.rng)

        if state.check(bit, self.config):
            logger.debug("change detected for user %s after %d interactions (pool size %d, alpha0 %.3f)",
                         user, state.interactions, len(self.pool), self.pool.alpha0)
            return True
        return False

    def _state_arrays(self) -> Iterable:
        yield self.pool.alpha0
        for key, model in self.pool.models.items():
            yield (key, model.assign_count, model.posterior.n_obs)
            yield model.posterior.precision
            yield model.posterior.moment
        for user, state in self.users.items():
            if state.interactions == 0 and state.detections == 0:
                continue
            yield (user, state.model_key, state.interactions, tuple(state.detector.bits))
            yield state.stats.gram
            yield state.stats.xty
