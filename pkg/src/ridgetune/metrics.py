"""Performance measures for the simulation study."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .glm import Dataset, fit_ml

SLOPE_FLOOR = 0.01
DEGENERATE_VAR = 1e-12
PRED_SCALE = 1e4


@dataclass(frozen=True)
class CoefRMSE:
    """RMSE over finite estimates, plus the all-in variant and exclusion count."""

    excluded_nonfinite: float
    included: float
    n_excluded: int
    n_total: int

    @property
    def excluded_fraction(self) -> float:
        return self.n_excluded / self.n_total if self.n_total else float("nan")


def rmse_coef_detail(estimates, truth: float) -> CoefRMSE:
    est = np.asarray(estimates, dtype=float).ravel()
    finite = np.isfinite(est)
    if not finite.any():
        raise ValueError("rmse_coef needs at least one finite estimate")
    err2 = (est - truth) ** 2
    with np.errstate(invalid="ignore"):
        included = math.sqrt(float(np.mean(err2))) if finite.all() else float("inf")
    return CoefRMSE(math.sqrt(float(np.mean(err2[finite]))), included, int((~finite).sum()), est.size)


def rmse_coef(estimates, truth: float) -> float:
    """Root mean squared error of coefficient estimates; nonfinite ones are dropped."""
    return rmse_coef_detail(estimates, truth).excluded_nonfinite


def rmse_pred(pi_hat, pi_true, scale: float = 1.0) -> float:
    """Root of the grand mean squared probability error over replicates and records.

    ``pi_hat`` and ``pi_true`` are (replicates, N) arrays or flat vectors.
    Pass ``scale=PRED_SCALE`` for the tabulated x10^4 units.
    """
    a = np.asarray(pi_hat, dtype=float)
    b = np.asarray(pi_true, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return scale * math.sqrt(float(np.mean((a - b) ** 2)))


def squared_pred_error(pi_hat, pi_true) -> float:
    """Mean squared error for one replicate; averaging these and taking the root gives rmse_pred."""
    return float(np.mean((np.asarray(pi_hat, float) - np.asarray(pi_true, float)) ** 2))


@dataclass(frozen=True)
class SlopeResult:
    slope: float
    intercept: float
    converged: bool
    degenerate: bool = False


def calibration_slope_eta(eta, y_val) -> SlopeResult:
    """Logistic recalibration of validation outcomes on a given linear predictor."""
    eta = np.asarray(eta, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if np.var(eta) < DEGENERATE_VAR or not np.all(np.isfinite(eta)):
        return SlopeResult(0.0, float("nan"), True, degenerate=True)
    fit = fit_ml(Dataset.from_covariates(eta, y_val))
    return SlopeResult(float(fit.beta[1]), float(fit.beta[0]), bool(fit.converged))


def calibration_slope(validation, beta_hat) -> float:
    """Slope from regressing fresh validation outcomes on ``X beta_hat``.

    ``validation`` is a GeneratedDataset or a Dataset.
    """
    data = getattr(validation, "data", validation)
    return calibration_slope_eta(data.X @ np.asarray(beta_hat, float), data.y).slope


def winsorize_slopes(slopes, floor: float = SLOPE_FLOOR) -> np.ndarray:
    return np.maximum(np.asarray(slopes, dtype=float), floor)


def rmsd_log_slope(slopes) -> float:
    d = -np.log(winsorize_slopes(slopes))
    return math.sqrt(float(np.mean(d**2)))


def c_index(pi_hat, y_val) -> float:
    """Concordance probability via the rank-sum identity; ties count one half."""
    y = np.asarray(y_val, dtype=float)
    n1 = float(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("c_index needs both outcome classes")
    ranks = rankdata(np.asarray(pi_hat, dtype=float))
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def mad(values) -> float:
    """Unscaled median absolute deviation."""
    v = np.asarray(values, dtype=float)
    return float(np.median(np.abs(v - np.median(v))))


def spearman(a, b) -> float:
    ra = rankdata(np.asarray(a, dtype=float))
    rb = rankdata(np.asarray(b, dtype=float))
    if ra.shape != rb.shape:
        raise ValueError("spearman needs equal-length inputs")
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    den = math.sqrt(float((ra**2).sum() * (rb**2).sum()))
    return float((ra * rb).sum() / den) if den > 0 else float("nan")


@dataclass(frozen=True)
class ReplicateRecord:
    """One method's result on one replicate.

    Missing quantities are None rather than zero, so aggregation can tell
    "not computed" from a real value.
    """

    scenario_id: str
    replicate: int
    method: str
    beta: tuple
    lambda_star: Optional[float] = None
    boundary_hit: Optional[bool] = None
    separated: bool = False
    converged: bool = True
    slope: Optional[float] = None
    cindex: Optional[float] = None
    rmse_pred_contrib: Optional[float] = None
    flags: tuple = field(default_factory=tuple)
