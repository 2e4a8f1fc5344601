import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_dataset
from ridgetune.exceptions import DimensionError, NonConvergenceError
from ridgetune.glm import (
    GRAD_TOL,
    PROB_CLIP,
    SEPARATION_SUSPECTED,
    Dataset,
    expit,
    fit_ml,
    log_likelihood,
    score_and_fisher,
)


def fd_gradient(data, beta, h=1e-6):
    g = np.empty_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (log_likelihood(data, beta + e) - log_likelihood(data, beta - e)) / (2 * h)
    return g


class TestExpit:
    def test_zero(self):
        assert expit(0.0) == 0.5

    def test_generator_probability(self):
        assert expit(-3.05) == pytest.approx(1.0 / (1.0 + math.exp(3.05)), rel=1e-14)
        assert expit(-3.05) == pytest.approx(0.0452, abs=5e-5)

    def test_saturation_no_overflow(self):
        with np.errstate(over="raise"):
            v = expit(40.0)
            w = expit(-800.0)
        assert 1 - 1e-15 < v <= 1.0
        assert w >= 0.0

    def test_nan_propagates(self):
        assert math.isnan(expit(float("nan")))


class TestDataset:
    def test_rejects_nonbinary(self):
        with pytest.raises(ValueError):
            Dataset.from_covariates(np.zeros(3), np.array([0, 1, 2]))

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            Dataset.from_covariates(np.zeros(2), np.array([0, 1]), w=np.array([1.0, -1.0]))

    def test_rejects_bad_intercept(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[2.0, 1.0], [1.0, 0.0]]), np.array([0.0, 1.0]))


class TestLogLikelihood:
    def test_half_probabilities(self):
        d = Dataset(np.ones((100, 1)), (np.arange(100) % 3 == 0).astype(float))
        assert log_likelihood(d, [0.0]) == pytest.approx(-100 * math.log(2))

    def test_zero_weights(self):
        d = Dataset(np.ones((5, 1)), np.array([0, 1, 0, 1, 1.0]), np.zeros(5))
        assert log_likelihood(d, [0.7]) == 0.0

    def test_matches_direct_sum(self, ds2):
        fit = fit_ml(ds2)
        p = 1 / (1 + np.exp(-(ds2.X @ fit.beta)))
        direct = sum(math.log(pi) if yi else math.log(1 - pi) for pi, yi in zip(p, ds2.y))
        assert log_likelihood(ds2, fit.beta) == pytest.approx(direct, abs=1e-9)

    def test_dimension_mismatch(self, ds2):
        with pytest.raises(DimensionError):
            log_likelihood(ds2, [0.0, 0.0, 0.0])


class TestScore:
    def test_balanced_centered_zero_gradient(self):
        x = np.array([-1.0, 1.0, -1.0, 1.0])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        g, _ = score_and_fisher(Dataset.from_covariates(x, y), np.zeros(2))
        assert np.allclose(g, 0.0)

    def test_fisher_diagonal_nonnegative(self, rng):
        d = random_dataset(rng, 30, 3)
        _, fisher = score_and_fisher(d, rng.standard_normal(4))
        assert np.all(np.diag(fisher) >= 0)
        assert np.allclose(fisher, fisher.T, rtol=1e-12, atol=0)

    def test_random_instance_finite_differences(self, rng):
        d = random_dataset(rng, 10, 2)
        beta = rng.standard_normal(3)
        g, _ = score_and_fisher(d, beta)
        assert np.max(np.abs(g - fd_gradient(d, beta))) <= 1e-6

    @pytest.mark.parametrize("seed", range(50))
    def test_gradient_fifty_instances(self, seed):
        r = np.random.default_rng(seed)
        d = random_dataset(r, int(r.integers(5, 30)), int(r.integers(1, 4)))
        d = d.with_weights(r.uniform(0.2, 2.0, d.n))
        beta = r.normal(0, 0.8, d.n_coef)
        g, _ = score_and_fisher(d, beta)
        assert np.max(np.abs(g - fd_gradient(d, beta))) <= 1e-6

    def test_fisher_matches_gradient_jacobian(self, rng):
        d = random_dataset(rng, 25, 2)
        beta = rng.normal(0, 0.5, 3)
        _, fisher = score_and_fisher(d, beta)
        h = 1e-6
        jac = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            jac[:, j] = (score_and_fisher(d, beta + e)[0] - score_and_fisher(d, beta - e)[0]) / (2 * h)
        assert np.allclose(-jac, fisher, atol=1e-6)


class TestFitML:
    def test_intercept_only(self):
        y = np.r_[np.ones(25), np.zeros(75)]
        fit = fit_ml(Dataset(np.ones((100, 1)), y))
        assert fit.converged
        assert fit.beta[0] == pytest.approx(math.log(0.25 / 0.75), abs=1e-8)

    def test_dataset2_log_odds_ratio(self, ds2):
        fit = fit_ml(ds2)
        assert fit.converged
        assert fit.beta[1] == pytest.approx(math.log(9 * 19 / (71 * 1)), abs=1e-8)
        assert fit.grad_norm <= GRAD_TOL

    def test_dataset1_nonconvergence(self, ds1):
        fit = fit_ml(ds1)
        assert not fit.converged
        assert SEPARATION_SUSPECTED in fit.flags
        with pytest.raises(NonConvergenceError) as err:
            fit_ml(ds1, strict=True)
        assert SEPARATION_SUSPECTED in err.value.result.flags

    def test_frozen_and_offset(self, rng):
        d = random_dataset(rng, 60, 2)
        init = np.array([0.0, 0.4, -0.2])
        fit = fit_ml(d, frozen=[1], init=init)
        assert fit.beta[1] == init[1]
        off = rng.normal(0, 0.3, d.n)
        a = fit_ml(d, offset=off)
        # an offset is equivalent to shifting the linear predictor
        g, _ = score_and_fisher(d, a.beta, off)
        assert np.max(np.abs(g)) <= GRAD_TOL

    def test_mean_prediction_equals_rate(self, rng):
        d = random_dataset(rng, 80, 3)
        d = d.with_weights(rng.uniform(0.5, 1.5, d.n))
        fit = fit_ml(d)
        p = fit.predict_proba(d.X)
        assert np.sum(d.w * p) / d.w.sum() == pytest.approx(np.sum(d.w * d.y) / d.w.sum(), abs=1e-8)

    def test_affine_equivariance(self, rng):
        d = random_dataset(rng, 100, 2)
        c = 3.7
        X2 = d.X.copy()
        X2[:, 1] *= c
        a = fit_ml(d)
        b = fit_ml(Dataset(X2, d.y))
        assert b.beta[1] == pytest.approx(a.beta[1] / c, rel=1e-8)
        assert np.allclose(a.predict_proba(d.X), b.predict_proba(X2), atol=1e-8)

    def test_deterministic(self, rng):
        d = random_dataset(rng, 40, 2)
        a, b = fit_ml(d), fit_ml(d)
        assert np.array_equal(a.beta, b.beta) and a.loglik == b.loglik

    def test_clip_constant(self):
        assert PROB_CLIP == 1e-10

    @given(st.integers(0, 10_000))
    def test_converged_fits_satisfy_gradient_contract(self, seed):
        r = np.random.default_rng(seed)
        d = random_dataset(r, int(r.integers(15, 60)), int(r.integers(1, 3)))
        fit = fit_ml(d)
        if fit.converged:
            g, _ = score_and_fisher(d, fit.beta)
            assert np.max(np.abs(g)) <= GRAD_TOL
