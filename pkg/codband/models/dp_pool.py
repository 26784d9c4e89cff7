"""
Dirichlet-Process Model Pool
Globally shared Bayesian linear models with Chinese-restaurant-process prior
weights, collapsed Gibbs reassignment of a user's observation set and
auxiliary-variable resampling of the concentration parameter
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from codband.errors import NumericalError, ParameterError
from codband.models.bayes_linear import (
    LinearPosterior,
    Observation,
    prior_predictive_logpdf,
    stack_observations,
)

logger = logging.getLogger(__name__)


def _normalize(log_w: NDArray[np.float64]) -> NDArray[np.float64]:
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise NumericalError("all model weights underflowed")
    return np.exp(log_w - total)


@dataclass(eq=False)
class GlobalModel:
    """One shared bandit model and the number of assignments it serves"""

    key: int
    posterior: LinearPosterior
    assign_count: int = 0


class ModelPool:
    """
    Pool of GlobalModels under a Dirichlet-process prior.

    Model keys are increasing integers starting at 1 and are never reused.
    A model whose assignment count drops to zero is removed.
    """

    def __init__(self, dim: int, ridge: float, noise_sd: float, alpha0: float,
                 gamma_a: float = 1.0, gamma_b: float = 1.0):
        for name, value in (("alpha0", alpha0), ("gamma_a", gamma_a), ("gamma_b", gamma_b),
                            ("ridge", ridge), ("noise_sd", noise_sd)):
            if not value > 0:
                raise ParameterError(f"{name} must be positive, got {value}")
        self.dim = int(dim)
        self.ridge = float(ridge)
        self.noise_sd = float(noise_sd)
        self.alpha0 = float(alpha0)
        self.gamma_a = float(gamma_a)
        self.gamma_b = float(gamma_b)
        self.models: Dict[int, GlobalModel] = {}
        self._next_key = 1

    def __len__(self) -> int:
        return len(self.models)

    @property
    def keys(self) -> List[int]:
        return list(self.models)

    @property
    def total_assignments(self) -> int:
        return sum(model.assign_count for model in self.models.values())

    def create_model(self) -> GlobalModel:
        """Add a model at the prior with no assignments"""
        model = GlobalModel(self._next_key, LinearPosterior(self.dim, self.ridge, self.noise_sd))
        self.models[model.key] = model
        self._next_key += 1
        logger.debug("created global model %d (pool size %d)", model.key, len(self.models))
        return model

    def _release(self, key: int):
        model = self.models[key]
        model.assign_count -= 1
        if model.assign_count <= 0:
            del self.models[key]
            logger.debug("removed global model %d (pool size %d)", key, len(self.models))

    def assign(self, key: Optional[int]) -> int:
        """Add one assignment to an existing model, or to a fresh one when key is None"""
        model = self.create_model() if key is None else self.models[key]
        model.assign_count += 1
        return model.key

    def crp_prior_weights(self) -> NDArray[np.float64]:
        """
        Chinese-restaurant-process weights

        Returns:
            Probabilities of length K+1: existing models in key order
            proportional to their counts, then the new-model entry
            proportional to alpha0
        """
        counts = np.array([m.assign_count for m in self.models.values()] + [self.alpha0],
                          dtype=np.float64)
        return counts / counts.sum()

    def draw_prior_key(self, rng: np.random.Generator) -> Optional[int]:
        """Categorical draw from the CRP weights without changing the pool; None means a new model"""
        keys = self.keys
        index = rng.choice(len(keys) + 1, p=self.crp_prior_weights())
        return keys[index] if index < len(keys) else None

    def sample_prior_model(self, rng: np.random.Generator) -> int:
        """
        Assign a model from the CRP prior, creating one on the new-model branch

        Args:
            rng: Random stream

        Returns:
            Key of the assigned model (its count already incremented)
        """
        return self.assign(self.draw_prior_key(rng))

    def log_posterior_weights(self, X: NDArray[np.float64], r: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unnormalized log weights of the collapsed conditional of a model index"""
        log_w = np.empty(len(self.models) + 1)
        for i, model in enumerate(self.models.values()):
            log_w[i] = np.log(model.assign_count) + model.posterior.predictive_logpdf(X, r).sum()
        log_w[-1] = np.log(self.alpha0) + prior_predictive_logpdf(X, r, self.ridge, self.noise_sd).sum()
        return log_w

    def posterior_weights(self, dataset: Sequence[Observation]) -> NDArray[np.float64]:
        """
        Collapsed Gibbs conditional over existing models plus a new one

        Args:
            dataset: The user's current observation set

        Returns:
            Probabilities of length K+1, normalized in log space
        """
        return _normalize(self.log_posterior_weights(*stack_observations(list(dataset), self.dim)))

    def gibbs_reassign(self, user_key, current_key: int, dataset: Sequence[Observation],
                       rng: np.random.Generator) -> int:
        """
        Resample the model serving one user's observation set

        Args:
            user_key: Identifier of the user (diagnostics only)
            current_key: Model currently holding the dataset
            dataset: The user's observation set, absorbed in the current model
            rng: Random stream

        Returns:
            Key of the model now holding the dataset
        """
        X, r = stack_observations(list(dataset), self.dim)
        self.models[current_key].posterior.expel_arrays(X, r)
        self._release(current_key)

        keys = self.keys
        weights = _normalize(self.log_posterior_weights(X, r))
        index = int(rng.choice(len(keys) + 1, p=weights))
        new_key = self.assign(keys[index] if index < len(keys) else None)
        self.models[new_key].posterior.absorb_arrays(X, r)
        if new_key != current_key:
            logger.debug("user %s moved from model %d to model %d", user_key, current_key, new_key)
        return new_key

    def resample_alpha0(self, n_assignments: int, rng: np.random.Generator) -> float:
        """
        One auxiliary-variable Gibbs step for alpha0 under its Gamma(a, b) prior

        Args:
            n_assignments: Total number of assignments (sum of model counts)
            rng: Random stream

        Returns:
            The new alpha0, also stored on the pool
        """
        n_models = len(self.models)
        if n_models < 1 or n_assignments < 1:
            raise ParameterError("alpha0 resampling needs at least one model and one assignment")
        eta = rng.beta(self.alpha0 + 1.0, n_assignments)
        rate = self.gamma_b - np.log(eta)
        odds = (self.gamma_a + n_models - 1.0) / (n_assignments * rate)
        shape = self.gamma_a + n_models if rng.random() < odds / (1.0 + odds) else self.gamma_a + n_models - 1.0
        alpha0 = rng.gamma(shape, 1.0 / rate)
        self.alpha0 = float(max(alpha0, np.finfo(float).tiny))
        return self.alpha0
