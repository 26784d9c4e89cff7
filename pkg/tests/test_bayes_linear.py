"""Tests for the Bayesian linear regression primitives."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.linalg import cholesky
from scipy.stats import norm

from codband.errors import DimensionMismatchError, ParameterError, PosteriorCorruptionError
from codband.models.bayes_linear import (
    LinearPosterior,
    Observation,
    RidgeStatistics,
    absorb,
    confidence_bound,
    expel,
    posterior_new,
    predictive_likelihood,
    ridge_estimate,
    sample_theta,
)


def _contexts(rng, n, dim):
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.uniform(0.2, 1.0, size=(n, 1))


def _pdf(value, mean, sd):
    return math.exp(-0.5 * ((value - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def _batch(X, r, ridge, noise_sd):
    precision = ridge * np.eye(X.shape[1]) + X.T @ X / noise_sd ** 2
    moment = X.T @ r / noise_sd ** 2
    return precision, moment


class TestPosteriorNew:
    def test_prior_identity(self):
        p = posterior_new(2, 1.0, 1.0)
        np.testing.assert_array_equal(p.precision, np.eye(2))
        np.testing.assert_array_equal(p.mean, np.zeros(2))
        assert p.n_obs == 0

    def test_prior_scalar(self):
        p = posterior_new(1, 0.25, 0.1)
        np.testing.assert_array_equal(p.precision, [[0.25]])

    @pytest.mark.parametrize("ridge,noise_sd", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_rejects_nonpositive(self, ridge, noise_sd):
        with pytest.raises(ParameterError):
            posterior_new(2, ridge, noise_sd)


class TestAbsorbExpel:
    def test_single_observation(self):
        p = absorb(posterior_new(2, 1.0, 1.0), Observation(np.array([1.0, 0.0]), 1.0))
        np.testing.assert_allclose(p.precision, [[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(p.mean, [0.5, 0.0])
        assert p.n_obs == 1

    def test_round_trip_to_prior(self):
        p = posterior_new(3, 1.0, 0.5)
        obs = Observation(np.array([0.3, -0.4, 0.5]), 0.7)
        expel(absorb(p, obs), obs)
        assert np.abs(p.precision - np.eye(3)).max() <= 1e-10
        assert np.abs(p.moment).max() <= 1e-10
        assert np.abs(p.mean).max() <= 1e-10
        assert p.n_obs == 0

    def test_consistent_reward_keeps_mean(self, rng):
        p = posterior_new(3, 1.0, 0.3)
        X = _contexts(rng, 10, 3)
        p.absorb([Observation(x, r) for x, r in zip(X, rng.normal(size=10))])
        before = p.mean.copy()
        x = _contexts(rng, 1, 3)[0]
        p.absorb(Observation(x, float(x @ before)))
        np.testing.assert_allclose(p.mean, before, atol=1e-12)

    def test_expel_subset_matches_batch(self, rng):
        X = _contexts(rng, 50, 4)
        r = rng.normal(size=50)
        observations = [Observation(x, v) for x, v in zip(X, r)]
        p = posterior_new(4, 1.0, 0.2)
        p.absorb(observations)
        removed = rng.choice(50, size=20, replace=False)
        p.expel([observations[i] for i in removed])
        kept = np.setdiff1d(np.arange(50), removed)
        precision, moment = _batch(X[kept], r[kept], 1.0, 0.2)
        np.testing.assert_allclose(p.precision, precision, rtol=1e-8)
        np.testing.assert_allclose(p.moment, moment, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(p.mean, np.linalg.solve(precision, moment), rtol=1e-8, atol=1e-10)
        assert p.n_obs == 30

    def test_random_interleavings_match_batch(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            dim = int(rng.integers(1, 9))
            ridge = float(rng.uniform(0.5, 2.0))
            noise_sd = float(rng.uniform(0.2, 1.0))
            p = LinearPosterior(dim, ridge, noise_sd)
            live = []
            for _ in range(int(rng.integers(1, 100))):
                if live and rng.random() < 0.3:
                    p.expel(live.pop(int(rng.integers(len(live)))))
                else:
                    obs = Observation(_contexts(rng, 1, dim)[0], float(rng.normal()))
                    p.absorb(obs)
                    live.append(obs)
            X = np.array([o.context for o in live]).reshape(len(live), dim)
            r = np.array([o.reward for o in live])
            precision, moment = _batch(X, r, ridge, noise_sd)
            scale = max(1.0, np.abs(precision).max())
            assert np.abs(p.precision - precision).max() <= 1e-8 * scale
            assert np.abs(p.moment - moment).max() <= 1e-8 * max(1.0, np.abs(moment).max())
            assert p.n_obs == len(live)

    def test_expel_from_prior_fails(self):
        p = posterior_new(2, 1.0, 1.0)
        with pytest.raises(PosteriorCorruptionError):
            p.expel(Observation(np.array([1.0, 0.0]), 1.0))
        np.testing.assert_array_equal(p.precision, np.eye(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            posterior_new(2, 1.0, 1.0).absorb(Observation(np.array([1.0, 0.0, 0.0]), 1.0))

    def test_context_norm_checked(self):
        with pytest.raises(ParameterError):
            Observation(np.array([1.0, 1.0]), 0.0)

    def test_reward_must_be_finite(self):
        with pytest.raises(ParameterError):
            Observation(np.array([1.0, 0.0]), float("nan"))


class TestSampleTheta:
    def test_prior_covariance(self):
        p = posterior_new(2, 4.0, 1.0)
        rng = np.random.default_rng(5)
        draws = np.array([sample_theta(p, rng) for _ in range(100_000)])
        cov = np.cov(draws.T)
        np.testing.assert_allclose(np.diag(cov), [0.25, 0.25], rtol=0.05)
        assert abs(cov[0, 1]) < 0.0125

    def test_mean_within_four_standard_errors(self, rng):
        p = posterior_new(3, 1.0, 0.5)
        X = _contexts(rng, 20, 3)
        p.absorb([Observation(x, v) for x, v in zip(X, rng.normal(size=20))])
        n = 100_000
        draws = np.array([p.sample(rng) for _ in range(n)])
        sd = np.sqrt(np.diag(p.covariance))
        assert np.all(np.abs(draws.mean(axis=0) - p.mean) <= 4 * sd / np.sqrt(n))

    def test_concentrates_without_noise(self, rng):
        p = posterior_new(2, 1.0, 1e-3)
        X = _contexts(rng, 200, 2)
        p.absorb([Observation(x, float(x @ [0.3, -0.2])) for x in X])
        draws = np.array([p.sample(rng) for _ in range(1000)])
        assert draws.std(axis=0).max() < 1e-3
        np.testing.assert_allclose(p.mean, [0.3, -0.2], atol=1e-4)

    def test_same_seed_same_draw(self):
        p = posterior_new(4, 1.0, 1.0)
        a = sample_theta(p, np.random.default_rng(9))
        b = sample_theta(p, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)


class TestRidgeEstimate:
    def test_empty_is_zero(self):
        np.testing.assert_array_equal(ridge_estimate([], 1.0, dim=3), np.zeros(3))

    def test_empty_without_dimension(self):
        with pytest.raises(ParameterError):
            ridge_estimate([], 1.0)

    def test_scalar_closed_form(self):
        np.testing.assert_allclose(ridge_estimate([Observation(np.array([1.0]), 2.0)], 1.0), [1.0])

    def test_noiseless_consistency(self, rng):
        theta = np.array([0.4, -0.3, 0.5])
        X = _contexts(rng, 100, 3)
        estimate = ridge_estimate([Observation(x, float(x @ theta)) for x in X], 1e-6)
        np.testing.assert_allclose(estimate, theta, atol=1e-3)

    def test_no_noise_weighting(self, rng):
        X = _contexts(rng, 10, 2)
        r = rng.normal(size=10)
        expected = np.linalg.solve(2.0 * np.eye(2) + X.T @ X, X.T @ r)
        np.testing.assert_allclose(ridge_estimate([Observation(x, v) for x, v in zip(X, r)], 2.0),
                                   expected, rtol=1e-10)


class TestConfidenceBound:
    def test_prior_value(self):
        x = np.array([1.0, 0.0])
        expected = 0.1 * np.sqrt(2 * np.log(20)) + 1.0
        assert confidence_bound([], x, 1.0, 0.1, 0.05) == pytest.approx(expected, rel=1e-12)
        assert confidence_bound([], x, 1.0, 0.1, 0.05) == pytest.approx(1.2448, abs=1e-4)

    def test_non_increasing_in_data(self):
        x = np.array([0.6, 0.8])
        bounds = [confidence_bound([Observation(x, 0.5)] * n, x, 1.0, 0.1, 0.05) for n in range(30)]
        assert all(b1 <= b0 + 1e-12 for b0, b1 in zip(bounds, bounds[1:]))

    def test_zero_context(self):
        assert confidence_bound([Observation(np.array([1.0, 0.0]), 1.0)], np.zeros(2), 1.0, 0.1, 0.05) == 0.0

    @pytest.mark.parametrize("delta1", [0.0, 1.0, -0.5, 1.5])
    def test_delta_range(self, delta1):
        with pytest.raises(ParameterError):
            confidence_bound([], np.array([1.0, 0.0]), 1.0, 0.1, delta1)

    def test_coverage(self):
        rng = np.random.default_rng(3)
        dim, noise_sd, hits, trials = 3, 0.1, 0, 10_000
        for _ in range(trials):
            theta = _contexts(rng, 1, dim)[0]
            X = _contexts(rng, int(rng.integers(1, 20)), dim)
            r = X @ theta + rng.normal(0.0, noise_sd, size=X.shape[0])
            stats = RidgeStatistics(dim, 1.0)
            for x, v in zip(X, r):
                stats.add(x, v)
            x = _contexts(rng, 1, dim)
            cb = stats.confidence_bounds(x, noise_sd, 0.05)[0]
            hits += abs(float(x[0] @ stats.estimate()) - float(x[0] @ theta)) <= cb
        assert hits / trials >= 0.93


class TestPredictiveLikelihood:
    def test_worked_example(self):
        p = absorb(posterior_new(2, 1.0, 1.0), Observation(np.array([1.0, 0.0]), 1.0))
        np.testing.assert_allclose(p.covariance, np.diag([0.5, 1.0]), atol=1e-12)
        density = predictive_likelihood(p, Observation(np.array([1.0, 0.0]), 1.0))
        assert density == pytest.approx(norm.pdf(1.0, 0.5, np.sqrt(1.5)), rel=1e-12)
        assert density == pytest.approx(0.2997, abs=1e-4)

    def test_prior_branch_variance(self):
        p = posterior_new(3, 2.0, 0.5)
        x = np.array([0.6, 0.0, 0.8])
        density = predictive_likelihood(p, Observation(x, 0.3))
        assert density == pytest.approx(norm.pdf(0.3, 0.0, np.sqrt(0.25 + 1.0 / 2.0)), rel=1e-12)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            noise_sd = float(rng.uniform(0.5, 1.5))
            p = posterior_new(2, float(rng.uniform(0.5, 2.0)), noise_sd)
            X = _contexts(rng, int(rng.integers(0, 4)), 2)
            p.absorb([Observation(x, v) for x, v in zip(X, rng.normal(size=X.shape[0]))])
            x = _contexts(rng, 1, 2)[0]
            r = float(rng.normal())
            # phi = mean + L z with z standard normal, so x^T phi = loc + c^T z
            loc = float(x @ p.mean)
            c0, c1 = x @ cholesky(p.covariance, lower=True)

            def integrand(z2, z1):
                return (_pdf(r, loc + c0 * z1 + c1 * z2, noise_sd)
                        * _pdf(z1, 0.0, 1.0) * _pdf(z2, 0.0, 1.0))

            value, _ = integrate.dblquad(integrand, -9, 9, -9, 9, epsabs=1e-10, epsrel=1e-10)
            assert abs(predictive_likelihood(p, Observation(x, r)) - value) < 1e-6

    def test_integrates_to_one(self, rng):
        p = posterior_new(2, 1.0, 0.4)
        X = _contexts(rng, 5, 2)
        p.absorb([Observation(x, v) for x, v in zip(X, rng.normal(size=5))])
        x = np.array([0.6, 0.8])
        total, _ = integrate.quad(lambda r: predictive_likelihood(p, Observation(x, r)), -np.inf, np.inf)
        assert abs(total - 1.0) < 1e-4

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            predictive_likelihood(posterior_new(2, 1.0, 1.0), Observation(np.array([1.0]), 0.0))
