"""
Bayesian Linear Regression Primitives
Conjugate Gaussian posterior with rank-one update/downdate, posterior sampling,
the ridge estimator used by change detection, confidence bounds and the
collapsed (marginalized) predictive likelihood
"""

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.stats import norm

from codband.errors import (
    DimensionMismatchError,
    NumericalError,
    ParameterError,
    PosteriorCorruptionError,
)

NORM_TOLERANCE = 1e-9


def as_context(x, dim: Optional[int] = None) -> NDArray[np.float64]:
    """
    Validate a context vector

    Args:
        x: Feature values
        dim: Expected dimension (skipped when None)

    Returns:
        1-d float64 array with Euclidean norm at most 1
    """
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"context must be 1-d, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatchError(f"context has dimension {vec.shape[0]}, expected {dim}")
    if np.linalg.norm(vec) > 1.0 + NORM_TOLERANCE:
        raise ParameterError(f"context norm {np.linalg.norm(vec):.6g} exceeds 1")
    return vec


@dataclass(frozen=True, eq=False)
class Observation:
    """One (context, reward) pair"""

    context: NDArray[np.float64]
    reward: float

    def __post_init__(self):
        object.__setattr__(self, "context", as_context(self.context))
        reward = float(self.reward)
        if not np.isfinite(reward):
            raise ParameterError(f"reward must be finite, got {self.reward}")
        object.__setattr__(self, "reward", reward)


def stack_observations(observations: Sequence[Observation],
                       dim: int) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Stack observations into a design matrix and a reward vector"""
    if not observations:
        return np.zeros((0, dim)), np.zeros(0)
    X = np.vstack([obs.context for obs in observations])
    if X.shape[1] != dim:
        raise DimensionMismatchError(f"observations have dimension {X.shape[1]}, expected {dim}")
    r = np.fromiter((obs.reward for obs in observations), dtype=np.float64, count=len(observations))
    return X, r


def _check_positive(name: str, value: float):
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")


class LinearPosterior:
    """
    Gaussian posterior N(mean, precision^-1) of a linear bandit parameter.

    Maintains precision = ridge*I + (1/noise_sd^2) * sum x x^T and
    moment = (1/noise_sd^2) * sum r x; mean is re-solved through a Cholesky
    factor of the precision after every update.
    """

    def __init__(self, dim: int, ridge: float, noise_sd: float):
        if dim < 1:
            raise ParameterError(f"dimension must be at least 1, got {dim}")
        _check_positive("ridge", ridge)
        _check_positive("noise_sd", noise_sd)
        self.dim = int(dim)
        self.ridge = float(ridge)
        self.noise_sd = float(noise_sd)
        self.reset()

    def reset(self):
        """Return to the prior state"""
        self.precision = self.ridge * np.eye(self.dim)
        self.moment = np.zeros(self.dim)
        self.mean = np.zeros(self.dim)
        self.n_obs = 0
        self._chol = np.sqrt(self.ridge) * np.eye(self.dim)
        self._covariance = None

    @property
    def noise_var(self) -> float:
        return self.noise_sd ** 2

    @property
    def covariance(self) -> NDArray[np.float64]:
        """Posterior covariance, the inverse of the precision"""
        if self._covariance is None:
            self._covariance = cho_solve((self._chol, True), np.eye(self.dim))
        return self._covariance

    def _install(self, precision, moment, n_obs):
        try:
            chol = cholesky(precision, lower=True)
        except LinAlgError as e:
            raise NumericalError(f"precision factorization failed: {e}") from e
        self.precision = precision
        self.moment = moment
        self.n_obs = n_obs
        self._chol = chol
        self._covariance = None
        self.mean = cho_solve((chol, True), moment)

    def _as_arrays(self, observations) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        if isinstance(observations, Observation):
            observations = [observations]
        return stack_observations(list(observations), self.dim)

    def absorb(self, observations) -> "LinearPosterior":
        """
        Add one observation or an iterable of observations

        Args:
            observations: Observation or iterable of Observation

        Returns:
            self, updated in place
        """
        return self.absorb_arrays(*self._as_arrays(observations))

    def expel(self, observations) -> "LinearPosterior":
        """
        Remove previously absorbed observations (exact inverse of absorb)

        Raises PosteriorCorruptionError, leaving the state untouched, when the
        downdated precision is not positive definite or more observations are
        removed than were absorbed.
        """
        return self.expel_arrays(*self._as_arrays(observations))

    def absorb_arrays(self, X: NDArray[np.float64], r: NDArray[np.float64]) -> "LinearPosterior":
        if X.shape[0] == 0:
            return self
        precision = self.precision + (X.T @ X) / self.noise_var
        moment = self.moment + (X.T @ r) / self.noise_var
        self._install(precision, moment, self.n_obs + X.shape[0])
        return self

    def expel_arrays(self, X: NDArray[np.float64], r: NDArray[np.float64]) -> "LinearPosterior":
        if X.shape[0] == 0:
            return self
        if X.shape[0] > self.n_obs:
            raise PosteriorCorruptionError(
                f"cannot remove {X.shape[0]} observations from a posterior holding {self.n_obs}")
        precision = self.precision - (X.T @ X) / self.noise_var
        moment = self.moment - (X.T @ r) / self.noise_var
        try:
            self._install(precision, moment, self.n_obs - X.shape[0])
        except NumericalError as e:
            raise PosteriorCorruptionError("downdate left the precision not positive definite") from e
        return self

    def sample(self, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draw theta ~ N(mean, precision^-1)"""
        z = rng.standard_normal(self.dim)
        # precision = L L^T, so L^-T z has covariance precision^-1
        return self.mean + solve_triangular(self._chol, z, lower=True, trans="T")

    def predictive_logpdf(self, contexts: NDArray[np.float64],
                          rewards: NDArray[np.float64]) -> NDArray[np.float64]:
        """Log density of each reward under N(x^T mean, noise_var + x^T cov x)"""
        contexts = np.atleast_2d(contexts)
        loc = contexts @ self.mean
        var = self.noise_var + np.sum((contexts @ self.covariance) * contexts, axis=1)
        return norm.logpdf(rewards, loc=loc, scale=np.sqrt(var))

    def copy(self) -> "LinearPosterior":
        other = LinearPosterior(self.dim, self.ridge, self.noise_sd)
        other._install(self.precision.copy(), self.moment.copy(), self.n_obs)
        return other


def prior_predictive_logpdf(contexts: NDArray[np.float64], rewards: NDArray[np.float64],
                            ridge: float, noise_sd: float) -> NDArray[np.float64]:
    """Log density under the zero-mean prior predictive N(0, noise_sd^2 + |x|^2 / ridge)"""
    contexts = np.atleast_2d(contexts)
    var = noise_sd ** 2 + np.sum(contexts * contexts, axis=1) / ridge
    return norm.logpdf(rewards, loc=0.0, scale=np.sqrt(var))


@dataclass(eq=False)
class RidgeStatistics:
    """
    Running sufficient statistics of the unweighted ridge estimator
    theta_hat = (ridge*I + sum x x^T)^-1 sum r x used by change detection
    """

    dim: int
    ridge: float
    gram: NDArray[np.float64] = field(init=False)
    xty: NDArray[np.float64] = field(init=False)
    count: int = field(init=False, default=0)

    def __post_init__(self):
        _check_positive("ridge", self.ridge)
        self.reset()

    def reset(self):
        self.gram = self.ridge * np.eye(self.dim)
        self.xty = np.zeros(self.dim)
        self.count = 0
        self._chol = None

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], dim: int,
                          ridge: float) -> "RidgeStatistics":
        stats = cls(dim, ridge)
        for obs in observations:
            stats.add(obs.context, obs.reward)
        return stats

    def add(self, context: NDArray[np.float64], reward: float):
        if context.shape[0] != self.dim:
            raise DimensionMismatchError(f"context has dimension {context.shape[0]}, expected {self.dim}")
        self.gram += np.outer(context, context)
        self.xty += reward * context
        self.count += 1
        self._chol = None

    def _factor(self):
        if self._chol is None:
            self._chol = cholesky(self.gram, lower=True)
        return self._chol

    def estimate(self) -> NDArray[np.float64]:
        return cho_solve((self._factor(), True), self.xty)

    def widths(self, contexts: NDArray[np.float64]) -> NDArray[np.float64]:
        """sqrt(x^T gram^-1 x) for every row of contexts"""
        contexts = np.atleast_2d(contexts)
        solved = cho_solve((self._factor(), True), contexts.T)
        return np.sqrt(np.maximum(np.sum(contexts.T * solved, axis=0), 0.0))

    def confidence_bounds(self, contexts: NDArray[np.float64], noise_sd: float,
                          delta1: float) -> NDArray[np.float64]:
        alpha = confidence_alpha(self.count, self.dim, self.ridge, noise_sd, delta1)
        return alpha * self.widths(contexts)


def confidence_alpha(n_obs: int, dim: int, ridge: float, noise_sd: float, delta1: float) -> float:
    """
    Width multiplier of the self-normalized confidence ellipsoid

    Returns:
        noise_sd * sqrt(dim*log(1 + n/(dim*ridge)) + 2*log(1/delta1)) + sqrt(ridge)
    """
    if not 0.0 < delta1 < 1.0:
        raise ParameterError(f"delta1 must lie in (0, 1), got {delta1}")
    _check_positive("ridge", ridge)
    return (noise_sd * np.sqrt(dim * np.log1p(n_obs / (dim * ridge)) + 2.0 * np.log(1.0 / delta1))
            + np.sqrt(ridge))


# Functional forms of the operations above

def posterior_new(dim: int, ridge: float, noise_sd: float) -> LinearPosterior:
    """Prior state: precision ridge*I, zero mean"""
    return LinearPosterior(dim, ridge, noise_sd)


def absorb(posterior: LinearPosterior, obs: Observation) -> LinearPosterior:
    return posterior.absorb(obs)


def expel(posterior: LinearPosterior, obs: Observation) -> LinearPosterior:
    return posterior.expel(obs)


def sample_theta(posterior: LinearPosterior, rng: np.random.Generator) -> NDArray[np.float64]:
    return posterior.sample(rng)


def ridge_estimate(observations: List[Observation], ridge: float,
                   dim: Optional[int] = None) -> NDArray[np.float64]:
    """
    Regularized least squares without noise weighting

    Args:
        observations: Observations, may be empty when dim is given
        ridge: Regularization strength
        dim: Dimension, required for an empty list

    Returns:
        (ridge*I + sum x x^T)^-1 sum r x
    """
    if dim is None:
        if not observations:
            raise ParameterError("dimension is required for an empty observation list")
        dim = observations[0].context.shape[0]
    return RidgeStatistics.from_observations(observations, dim, ridge).estimate()


def confidence_bound(observations: List[Observation], x, ridge: float, noise_sd: float,
                     delta1: float) -> float:
    """
    Confidence half-width alpha * sqrt(x^T A^-1 x), A = ridge*I + sum x x^T

    Args:
        observations: Observations behind the estimator
        x: Context to bound
        ridge: Regularization strength
        noise_sd: Reward noise standard deviation
        delta1: Failure probability in (0, 1)

    Returns:
        Nonnegative half-width
    """
    x = np.asarray(x, dtype=np.float64)
    stats = RidgeStatistics.from_observations(observations, x.shape[0], ridge)
    return float(stats.confidence_bounds(x, noise_sd, delta1)[0])


def predictive_likelihood(posterior: LinearPosterior, obs: Observation) -> float:
    """Density of obs.reward under the collapsed predictive of posterior"""
    if obs.context.shape[0] != posterior.dim:
        raise DimensionMismatchError(
            f"context has dimension {obs.context.shape[0]}, expected {posterior.dim}")
    return float(np.exp(posterior.predictive_logpdf(obs.context, np.array([obs.reward]))[0]))
