import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ridgetune.glm import Dataset
from ridgetune.metrics import (
    PRED_SCALE,
    ReplicateRecord,
    c_index,
    calibration_slope,
    calibration_slope_eta,
    mad,
    rmse_coef,
    rmse_coef_detail,
    rmse_pred,
    rmsd_log_slope,
    spearman,
    squared_pred_error,
    winsorize_slopes,
)
from ridgetune.simgen import ScenarioConfig, default_calibration, generate_validation

finite = st.floats(-1e3, 1e3, allow_nan=False)


def brute_cindex(p, y):
    ev, ne = p[y == 1], p[y == 0]
    diff = ev[:, None] - ne[None, :]
    return float(((diff > 0) + 0.5 * (diff == 0)).mean())


class TestRmseCoef:
    def test_examples(self):
        assert rmse_coef([2.0, 2.0, 2.0], 2.0) == 0.0
        assert rmse_coef([1.0, 3.0], 2.0) == 1.0

    def test_nonfinite_excluded_and_counted(self):
        d = rmse_coef_detail([1.0, 3.0, np.inf, np.nan], 2.0)
        assert d.excluded_nonfinite == 1.0
        assert d.included == math.inf
        assert d.n_excluded == 2 and d.excluded_fraction == 0.5

    def test_all_nonfinite(self):
        with pytest.raises(ValueError):
            rmse_coef([np.inf], 0.0)

    @given(arrays(float, 6, elements=finite), st.floats(0.01, 100))
    def test_scale(self, err, c):
        assert rmse_coef(c * err, 0.0) == pytest.approx(c * rmse_coef(err, 0.0), rel=1e-9, abs=1e-12)


class TestRmsePred:
    def test_examples(self):
        p = np.full((3, 4), 0.2)
        assert rmse_pred(p, p) == 0.0
        assert rmse_pred(p + 0.01, p) == pytest.approx(0.01)
        assert rmse_pred(p + 0.01, p, scale=PRED_SCALE) == pytest.approx(100.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse_pred(np.zeros(3), np.zeros(4))

    def test_per_replicate_route(self, rng):
        a, b = rng.random((5, 20)), rng.random((5, 20))
        pooled = math.sqrt(np.mean([squared_pred_error(x, y) for x, y in zip(a, b)]))
        assert pooled == pytest.approx(rmse_pred(a, b), rel=1e-12)

    @given(arrays(float, (2, 3), elements=st.floats(-0.5, 0.5)), st.floats(0.01, 2))
    def test_scale(self, err, c):
        z = np.zeros_like(err)
        assert rmse_pred(c * err, z) == pytest.approx(c * rmse_pred(err, z), rel=1e-9, abs=1e-15)


@pytest.fixture(scope="module")
def val():
    return generate_validation(ScenarioConfig(500, 2, 1.0, 0.25, False), 0, 777, default_calibration())


class TestCalibrationSlope:
    def test_true_model_near_one(self, val):
        beta = np.r_[val.beta0, val.beta_true]
        assert calibration_slope(val, beta) == pytest.approx(1.0, abs=0.05)

    def test_halving_doubles(self, val):
        beta = np.r_[val.beta0, val.beta_true]
        half = np.r_[val.beta0, 0.5 * val.beta_true]
        assert calibration_slope(val, half) == pytest.approx(2 * calibration_slope(val, beta), rel=1e-6)

    def test_constant_predictor(self, val):
        r = calibration_slope_eta(np.full(val.data.n, -1.3), val.data.y)
        assert r.slope == 0.0 and r.degenerate

    def test_same_eta_same_slope(self, rng):
        X = rng.standard_normal((200, 2))
        y = (rng.random(200) < 0.3).astype(float)
        d = Dataset.from_covariates(np.column_stack([X, X[:, 0]]), y)
        b1 = np.array([0.1, 1.0, -0.5, 0.0])
        b2 = np.array([0.1, 0.4, -0.5, 0.6])
        assert calibration_slope(d, b1) == pytest.approx(calibration_slope(d, b2), rel=1e-10)


class TestRmsd:
    def test_examples(self):
        assert rmsd_log_slope([1.0, 1.0]) == 0.0
        assert rmsd_log_slope([0.005]) == pytest.approx(-math.log(0.01))
        assert rmsd_log_slope([0.005]) == pytest.approx(4.6052, abs=1e-4)

    def test_winsorize_only_low(self):
        assert winsorize_slopes([-1.0, 0.0, 0.005, 0.01, 3.0]).tolist() == [0.01, 0.01, 0.01, 0.01, 3.0]


class TestCIndex:
    def test_examples(self):
        y = np.array([0.0, 0, 1, 1])
        assert c_index(np.array([0.1, 0.2, 0.3, 0.4]), y) == 1.0
        assert c_index(np.full(4, 0.3), y) == 0.5

    def test_single_class(self):
        with pytest.raises(ValueError):
            c_index(np.array([0.1, 0.2]), np.array([1.0, 1.0]))

    @given(st.integers(0, 10_000))
    def test_brute_force_and_monotone_invariance(self, seed):
        r = np.random.default_rng(seed)
        p = np.round(r.random(40), 1)
        y = (r.random(40) < 0.4).astype(float)
        y[:2] = [0.0, 1.0]
        assert c_index(p, y) == pytest.approx(brute_cindex(p, y), abs=1e-12)
        assert c_index(np.exp(3 * p) - 7, y) == pytest.approx(c_index(p, y), abs=1e-12)


class TestMadSpearman:
    def test_mad(self):
        assert mad([1, 2, 3]) == 1.0
        assert mad([4, 4, 4]) == 0.0
        assert mad([1, 1, 1, 10]) == 0.0

    def test_spearman(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        assert spearman([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6)

    @given(arrays(float, 8, elements=finite, unique=True), arrays(float, 8, elements=finite))
    def test_spearman_monotone_invariance(self, a, b):
        s = spearman(a, b)
        if not math.isnan(s):
            assert spearman(np.arctan(a), b) == pytest.approx(s, abs=1e-12)


class TestRecord:
    def test_missing_fields_are_none(self):
        r = ReplicateRecord("K2_N100_a1_ey0.1_noise0", 0, "FC", (0.1, 0.2, 0.3))
        assert r.lambda_star is None and r.slope is None and r.cindex is None
        with pytest.raises(dataclasses.FrozenInstanceError):
            r.slope = 1.0
