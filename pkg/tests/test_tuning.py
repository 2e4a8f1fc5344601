import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_dataset
from ridgetune.exceptions import SelectionError
from ridgetune.glm import PROB_CLIP, Dataset, fit_ml
from ridgetune.penalty import PenaltySpec, Standardizer, destandardize, fit_ridge_augmented, standardize
from ridgetune.simgen import derive_rng, illustrative_generator
from ridgetune.tuning import (
    MIN_LARGEST,
    MIN_SMALLEST,
    FoldAssignment,
    criterion_AIC,
    criterion_CE,
    criterion_D,
    criterion_GCV,
    cv_deviance_profiles,
    default_grid,
    df_profile,
    effective_df,
    loocv_predictions,
    loocv_profile,
    oracle_oex,
    oracle_op,
    profile_AIC,
    profile_CE,
    profile_D,
    profile_GCV,
    rcv,
    rcv_lambdas,
    ridge_path,
    select_lambda,
    stratified_folds,
)


@pytest.fixture(scope="module")
def ds1_tuned():
    from ridgetune.simgen import illustrative_dataset

    d, std = standardize(illustrative_dataset(1))
    path = ridge_path(d)
    return d, std, path, loocv_profile(d, path)


class TestGrid:
    def test_endpoints_and_ratio(self):
        g = default_grid()
        assert g.size == 200 and g[0] == 1e-6 and g[-1] == 100.0
        ratios = g[1:] / g[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-12, atol=0)
        assert g[1] == pytest.approx(10 ** (-6 + 8 / 199), rel=1e-12)


class TestSelectLambda:
    def test_ties(self):
        assert select_lambda([3, 1, 1, 2], MIN_SMALLEST) == 1
        assert select_lambda([3, 1, 1, 2], MIN_LARGEST) == 2

    def test_decreasing(self):
        s = [5.0, 4.0, 3.0, 2.0]
        assert select_lambda(s, MIN_SMALLEST) == 3 == select_lambda(s, MIN_LARGEST)

    def test_nonfinite_ignored(self):
        assert select_lambda([np.inf, np.nan, 2.0, 3.0]) == 2
        with pytest.raises(SelectionError):
            select_lambda([np.inf, np.nan])


class TestLoocv:
    def test_dataset1_anchors(self, ds1):
        d, _ = standardize(ds1)
        mask = (ds1.X[:, 1] == 1) & (ds1.y == 1)
        low = loocv_predictions(d, 1e-6).probs[mask]
        high = loocv_predictions(d, 1e6).probs[mask]
        assert np.allclose(low, 8 / 79, atol=2e-3)
        assert np.allclose(high, 8 / 99, atol=2e-3)

    def test_two_records_intercept_only(self):
        d = Dataset(np.ones((2, 1)), np.array([0.0, 1.0]))
        cv = loocv_predictions(d, 1.0)
        assert cv.probs[0] == pytest.approx(1 - PROB_CLIP, abs=1e-12)
        assert cv.probs[1] == pytest.approx(PROB_CLIP, abs=1e-12)
        assert cv.clipped.all()

    def test_brute_force_refits(self):
        r = np.random.default_rng(3)
        d, _ = standardize(random_dataset(r, 20, 3))
        for lam in (0.01, 0.7, 20.0):
            fast = loocv_predictions(d, lam).probs
            slow = np.empty(d.n)
            for i in range(d.n):
                keep = np.arange(d.n) != i
                fit = fit_ridge_augmented(Dataset(d.X[keep], d.y[keep]), PenaltySpec(lam))
                slow[i] = fit.predict_proba(d.X[i : i + 1])[0]
            assert np.max(np.abs(fast - slow)) <= 1e-6

    def test_profile_matches_single_lambda(self, ds1_tuned):
        d, _, path, loo = ds1_tuned
        j = 120
        single = loocv_predictions(d, path.grid[j]).probs
        assert np.allclose(loo[0][j], single, atol=1e-8)


class TestCriteria:
    def test_D_perfect(self):
        y = np.array([0.0, 1.0, 1.0])
        assert criterion_D(y, y) == pytest.approx(-2 * 3 * math.log(1 - 1e-10), abs=1e-12)

    def test_D_half(self):
        assert criterion_D(np.full(8, 0.5), np.r_[np.ones(3), np.zeros(5)]) == pytest.approx(16 * math.log(2))

    def test_D_dataset1_prefers_small_lambda(self, ds1_tuned):
        d, _, path, loo = ds1_tuned
        prof = profile_D(d, path, loo)
        assert prof.scores[0] < prof.scores[-1]
        assert prof.selected == 1e-6 and prof.boundary_hit

    def test_CE_examples(self):
        assert criterion_CE(np.full(4, 0.1), np.zeros(4), c=0.5) == 0.0
        assert criterion_CE(np.array([0.3, 0.1, 0.9, 0.2]), np.array([0, 0, 1, 0.0]), c=0.3) == pytest.approx(1 / 8)
        assert criterion_CE(np.array([0.9, 0.1]), np.array([0.0, 1.0]), c=0.5) == 1.0

    def test_CE_default_cutoff_is_event_rate(self):
        p = np.array([0.2, 0.3, 0.1, 0.6])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        assert criterion_CE(p, y) == criterion_CE(p, y, c=0.5)

    def test_GCV_examples(self):
        assert criterion_GCV(100, 120.0, 0.0) == pytest.approx(1.2)
        assert criterion_GCV(100, 120.0, 4.0) == pytest.approx(100 * 120 / 96**2)
        assert criterion_GCV(100, 120.0, 4.0) == pytest.approx(1.3021, abs=1e-4)
        with pytest.raises(ValueError):
            criterion_GCV(10, 5.0, 10.0)

    def test_GCV_modes_differ_only_in_deviance(self, rng):
        d, _ = standardize(random_dataset(rng, 40, 2))
        path = ridge_path(d)
        loo = loocv_profile(d, path)
        df_e = df_profile(path)
        a = profile_GCV(d, path, df_e, loo, mode="insample")
        b = profile_GCV(d, path, df_e, loo, mode="loocv")
        j = 150
        assert a.scores[j] == pytest.approx(criterion_GCV(d.n, -2 * path.loglik[j], df_e[j]))
        assert b.scores[j] == pytest.approx(criterion_GCV(d.n, criterion_D(loo[0][j], d.y), df_e[j]))
        with pytest.raises(ValueError):
            profile_GCV(d, path, df_e, None, mode="loocv")


class TestEffectiveDf:
    def test_limits(self, rng):
        d, _ = standardize(random_dataset(rng, 50, 3))
        fisher = fit_ml(d).fisher
        assert effective_df(fisher, 0.0) == pytest.approx(4.0, abs=1e-10)
        assert effective_df(fisher, 1e9) == pytest.approx(1.0, abs=1e-6)

    def test_generalized_eigen_oracle(self, rng):
        d, _ = standardize(random_dataset(rng, 30, 3))
        fit = fit_ridge_augmented(d, PenaltySpec(1.3))
        P = np.diag([0.0, 1, 1, 1])
        ev = scipy.linalg.eigh(fit.fisher, fit.fisher + 1.3 * P, eigvals_only=True)
        assert effective_df(fit.fisher, 1.3) == pytest.approx(ev.sum(), abs=1e-8)

    @given(st.integers(0, 10_000))
    def test_monotone_along_path(self, seed):
        r = np.random.default_rng(seed)
        d, _ = standardize(random_dataset(r, 40, 2))
        path = ridge_path(d, default_grid(40))
        df = df_profile(path)
        ok = path.converged
        assert np.all(np.diff(df[ok]) <= 1e-8)


class TestAIC:
    def test_vanishing_penalty(self, rng):
        d, _ = standardize(random_dataset(rng, 80, 3))
        fit = fit_ridge_augmented(d, PenaltySpec(1e-6))
        ml = fit_ml(d)
        aic = criterion_AIC(fit.loglik, effective_df(fit.fisher, 1e-6))
        assert aic == pytest.approx(-2 * ml.loglik + 2 * 4, abs=1e-3)

    def test_infinite_penalty_limit(self, rng):
        d, _ = standardize(random_dataset(rng, 80, 3))
        fit = fit_ridge_augmented(d, PenaltySpec(1e7))
        null = fit_ml(Dataset(d.X[:, :1], d.y))
        aic = criterion_AIC(fit.loglik, effective_df(fit.fisher, 1e7))
        assert aic == pytest.approx(-2 * null.loglik + 2, abs=1e-3)

    def test_profile_finite(self, rng):
        d, _ = standardize(random_dataset(rng, 60, 2))
        prof = profile_AIC(d, ridge_path(d))
        assert np.all(np.isfinite(prof.scores))


class TestFolds:
    @given(st.integers(0, 10_000), st.integers(10, 60), st.integers(20, 200))
    def test_stratified_balance(self, seed, events, n):
        events = min(events, n - 1)
        y = np.r_[np.ones(events), np.zeros(n - events)]
        a = stratified_folds(y, np.random.default_rng(seed))
        assert a.stratified
        ev = np.bincount(a.folds[y == 1], minlength=10)
        ne = np.bincount(a.folds[y == 0], minlength=10)
        assert ev.max() - ev.min() <= 1 and ne.max() - ne.min() <= 1

    def test_few_events_unstratified(self):
        y = np.r_[np.ones(4), np.zeros(40)]
        assert not stratified_folds(y, np.random.default_rng(0)).stratified

    def test_cv_deviance_brute_force(self):
        r = np.random.default_rng(11)
        d, _ = standardize(random_dataset(r, 30, 2))
        a = stratified_folds(d.y, r) if d.y.sum() >= 10 else FoldAssignment(np.arange(30) % 10)
        grid = np.array([0.05, 3.0])
        dev, bad = cv_deviance_profiles(d, grid, [a])
        for j, lam in enumerate(grid):
            total = 0.0
            for f in range(10):
                tr, te = a.folds != f, a.folds == f
                fit = fit_ridge_augmented(Dataset(d.X[tr], d.y[tr]), PenaltySpec(lam))
                total += criterion_D(fit.predict_proba(d.X[te]), d.y[te])
            assert dev[0, j] == pytest.approx(total, abs=1e-6)
        assert bad.sum() == 0


class TestRCV:
    def test_single_repetition(self, rng):
        d, _ = standardize(random_dataset(rng, 60, 2))
        grid = default_grid(30)
        res = rcv_lambdas(d, grid, np.random.default_rng(5), reps=1)
        lam = rcv(d, grid, 0.5, np.random.default_rng(5), reps=1)
        assert lam == res.per_rep[0] == grid[select_lambda(res.deviance[0])]

    def test_constant_values(self):
        from ridgetune.tuning import RCVResult

        res = RCVResult(np.full(50, 0.37), np.zeros((50, 3)), True, np.zeros((50, 3)))
        assert res.quantile(0.05) == res.quantile(0.95) == 0.37

    def test_linear_interpolation(self):
        from ridgetune.tuning import RCVResult

        res = RCVResult(np.array([1.0, 2.0, 3.0, 4.0]), None, True, None)
        assert res.quantile(0.5) == 2.5

    def test_seed_determinism(self, rng):
        d, _ = standardize(random_dataset(rng, 60, 2))
        grid = default_grid(30)
        a = rcv_lambdas(d, grid, np.random.default_rng(1), reps=5)
        b = rcv_lambdas(d, grid, np.random.default_rng(1), reps=5)
        c = rcv_lambdas(d, grid, np.random.default_rng(2), reps=5)
        assert np.array_equal(a.deviance, b.deviance)
        assert not np.array_equal(a.deviance, c.deviance)

    def test_bad_theta(self, rng):
        d, _ = standardize(random_dataset(rng, 30, 1))
        with pytest.raises(ValueError):
            rcv(d, default_grid(5), 1.0, rng)


class TestOracles:
    def test_oex_definition_and_dataset2(self, ds2):
        d, std = standardize(ds2)
        path = ridge_path(d)
        # ridge only shrinks the slope here, so an interior target is needed
        prof = oracle_oex(path, 0.3, std)
        est = np.array([destandardize(b, std)[1] for b in path.betas])
        err = np.abs(est - 0.3)
        assert np.all(err[prof.selected_index] <= err)
        assert err[prof.selected_index] < err[0] and err[prof.selected_index] < err[-1]

    def test_oex_exact_hit(self, ds2):
        d, std = standardize(ds2)
        path = ridge_path(d, default_grid(20))
        target = destandardize(path.betas[7], std)[1]
        assert oracle_oex(path, target, std).selected_index == 7

    def test_op_exact_hit_and_endpoints(self, ds2):
        d, _ = standardize(ds2)
        path = ridge_path(d, default_grid(20))
        truth = path.predictions(d.X)[11]
        prof = oracle_op(path, d, truth)
        assert prof.selected_index == 11 and prof.scores[11] == 0.0
        prof2 = oracle_op(path, d, np.full(d.n, 0.12))
        assert prof2.scores[prof2.selected_index] <= min(prof2.scores[0], prof2.scores[-1])

    def test_op_shape_check(self, ds2):
        d, _ = standardize(ds2)
        with pytest.raises(ValueError):
            oracle_op(ridge_path(d, default_grid(5)), d, np.ones(3))


class TestProfiles:
    def test_ce_uses_largest_minimizer(self, rng):
        d, _ = standardize(random_dataset(rng, 50, 2))
        path = ridge_path(d, default_grid(40))
        prof = profile_CE(d, path, loocv_profile(d, path))
        best = np.min(prof.scores)
        assert prof.selected_index == np.flatnonzero(prof.scores == best)[-1]

    def test_boundary_flag(self, ds1_tuned):
        d, _, path, loo = ds1_tuned
        assert profile_D(d, path, loo).boundary_hit


def test_prediction_oracle_shrinks_more_than_explanation_oracle():
    from ridgetune.harness.illustrate import REPLICATE_HEADER, replicate_rows

    rows = replicate_rows(31, 500)
    i_oex, i_op = REPLICATE_HEADER.index("lambda_OEX"), REPLICATE_HEADER.index("lambda_OP")
    oex = np.array([r[i_oex] for r in rows], dtype=float)
    op = np.array([r[i_op] for r in rows], dtype=float)
    ok = np.isfinite(oex) & np.isfinite(op)
    assert np.median(op[ok]) >= np.median(oex[ok])
