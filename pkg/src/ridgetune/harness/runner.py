"""Fit every method on one simulated replicate and score it on validation data."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..exceptions import ConstantColumnError, RidgeTuneError
from ..glm import expit, fit_ml
from ..metrics import ReplicateRecord, c_index, calibration_slope_eta, squared_pred_error
from ..penalty import (
    IP_LAMBDA,
    WP_LAMBDA,
    PenaltySpec,
    destandardize,
    fit_firth,
    fit_ridge_augmented,
    flic,
    standardize,
)
from ..separation import detect_separation
from ..simgen import Calibration, ScenarioConfig, derive_rng, generate_dataset, generate_validation
from ..tuning import (
    RCV_REPS,
    default_grid,
    df_profile,
    loocv_profile,
    oracle_oex,
    oracle_op,
    profile_AIC,
    profile_CE,
    profile_D,
    profile_GCV,
    rcv_lambdas,
    ridge_path,
)

log = logging.getLogger(__name__)

STUDY_METHODS = ("ML", "FC", "FLIC", "D", "GCV", "CE", "RCV50", "RCV95", "AIC", "IP", "WP", "OEX", "OP")
OPTIMAL = "Optimal"
ALL_METHODS = STUDY_METHODS + (OPTIMAL,)
TUNED = ("D", "GCV", "CE", "RCV50", "RCV95", "AIC", "OEX", "OP")
_LOO_USERS = {"D", "CE"}


@dataclass(frozen=True)
class MethodFit:
    beta: np.ndarray
    converged: bool
    lambda_star: Optional[float] = None
    boundary_hit: Optional[bool] = None
    flags: tuple = ()


def _failed(n_coef: int, flag: str) -> MethodFit:
    return MethodFit(np.full(n_coef, np.nan), False, flags=(flag,))


def _from_fit(fit, std=None, **kw) -> MethodFit:
    beta = fit.beta if std is None else destandardize(fit.beta, std)
    return MethodFit(np.asarray(beta, float), bool(fit.converged), flags=tuple(sorted(fit.flags)), **kw)


def fit_methods(gen, methods: Sequence[str], grid=None, gcv_mode: str = "insample",
                rcv_rng: Optional[np.random.Generator] = None, rcv_reps: int = RCV_REPS,
                separated: bool = False) -> dict:
    """Fit the requested methods on a generated dataset.

    Returns a dict method -> MethodFit with destandardized coefficients. When
    ``separated`` is set the ML estimate does not exist, so the ML record is
    marked non-converged whatever the gradient test said.
    """
    data = gen.data
    p = data.n_coef
    grid = default_grid() if grid is None else np.asarray(grid, float)
    methods = list(methods)
    out = {}

    if OPTIMAL in methods:
        out[OPTIMAL] = MethodFit(np.r_[gen.beta0, gen.beta_true], True)
    if "ML" in methods:
        ml = _from_fit(fit_ml(data))
        if separated:
            ml = MethodFit(ml.beta, False, flags=tuple(sorted(set(ml.flags) | {"ml_not_finite"})))
        out["ML"] = ml
    if "FC" in methods or "FLIC" in methods:
        firth = fit_firth(data)
        if "FC" in methods:
            out["FC"] = _from_fit(firth)
        if "FLIC" in methods:
            if firth.converged:
                out["FLIC"] = _from_fit(flic(data, firth))
            else:
                out["FLIC"] = _failed(p, "firth_not_converged")

    ridge = [m for m in methods if m not in {"ML", "FC", "FLIC", OPTIMAL}]
    if not ridge:
        return out
    try:
        std_data, std = standardize(data)
    except ConstantColumnError:
        for m in ridge:
            out[m] = _failed(p, "constant_column")
        return out

    for m, lam in (("IP", IP_LAMBDA), ("WP", WP_LAMBDA)):
        if m in methods:
            out[m] = _from_fit(fit_ridge_augmented(std_data, PenaltySpec(lam)), std, lambda_star=lam)

    tuned = [m for m in ridge if m in TUNED]
    if not tuned:
        return out
    path = ridge_path(std_data, grid)
    need_loo = bool(_LOO_USERS & set(tuned)) or ("GCV" in tuned and gcv_mode == "loocv")
    loo = loocv_profile(std_data, path) if need_loo else None
    df_e = df_profile(path) if ("GCV" in tuned or "AIC" in tuned) else None

    profiles = {}
    if "D" in tuned:
        profiles["D"] = profile_D(std_data, path, loo)
    if "CE" in tuned:
        profiles["CE"] = profile_CE(std_data, path, loo)
    if "GCV" in tuned:
        profiles["GCV"] = profile_GCV(std_data, path, df_e, loo, mode=gcv_mode)
    if "AIC" in tuned:
        profiles["AIC"] = profile_AIC(std_data, path, df_e)
    if "OEX" in tuned:
        profiles["OEX"] = oracle_oex(path, float(gen.beta_true[0]), std)
    if "OP" in tuned:
        profiles["OP"] = oracle_op(path, std_data, gen.pi_true)

    for m, prof in profiles.items():
        fit = path.fit_at(prof.selected_index)
        extra = ("boundary_lambda",) if prof.boundary_hit else ()
        mf = _from_fit(fit, std, lambda_star=float(prof.selected), boundary_hit=bool(prof.boundary_hit))
        out[m] = MethodFit(mf.beta, mf.converged, mf.lambda_star, mf.boundary_hit, mf.flags + extra)

    rcv_methods = [m for m in ("RCV50", "RCV95") if m in tuned]
    if rcv_methods:
        if rcv_rng is None:
            raise ValueError("RCV needs a random generator")
        res = rcv_lambdas(std_data, grid, rcv_rng, reps=rcv_reps)
        for m in rcv_methods:
            lam = res.quantile(0.5 if m == "RCV50" else 0.95)
            j = int(np.argmin(np.abs(np.log(grid) - np.log(lam))))
            fit = fit_ridge_augmented(std_data, PenaltySpec(lam), init=path.betas[j])
            hit = bool(lam <= grid[0] or lam >= grid[-1])
            flags = (("boundary_lambda",) if hit else ()) + (() if res.stratified else ("unstratified_folds",))
            mf = _from_fit(fit, std, lambda_star=float(lam), boundary_hit=hit)
            out[m] = MethodFit(mf.beta, mf.converged, mf.lambda_star, mf.boundary_hit, mf.flags + flags)
    return out


def evaluate(gen, val, fit: MethodFit):
    """(slope, c-index, mean squared training prediction error, extra flags)."""
    beta = fit.beta
    if not np.all(np.isfinite(beta)):
        return None, None, None, ()
    pi_hat = expit(gen.data.X @ beta)
    eta_val = val.data.X @ beta
    slope = calibration_slope_eta(eta_val, val.data.y)
    flags = ()
    if slope.degenerate:
        flags += ("degenerate_slope",)
    elif not slope.converged:
        flags += ("slope_not_converged",)
    try:
        cidx = c_index(eta_val, val.data.y)
    except ValueError:
        cidx = None
    return slope.slope, cidx, squared_pred_error(pi_hat, gen.pi_true), flags


def run_replicate(scenario: ScenarioConfig, replicate: int, master_seed: int, calibration: Calibration,
                  methods: Sequence[str] = ALL_METHODS, grid=None, gcv_mode: str = "insample",
                  rcv_reps: int = RCV_REPS) -> list:
    """All method records for one replicate, in the order of ``methods``."""
    gen = generate_dataset(scenario, replicate, master_seed, calibration)
    val = generate_validation(scenario, replicate, master_seed, calibration)
    sep = detect_separation(gen.data)
    rng = derive_rng(master_seed, scenario.scenario_id, replicate, "rcv")
    try:
        fits = fit_methods(gen, methods, grid, gcv_mode, rng, rcv_reps, sep.separated)
    except RidgeTuneError as exc:
        log.warning("%s rep %d: %s", scenario.scenario_id, replicate, exc)
        fits = {m: _failed(gen.data.n_coef, type(exc).__name__) for m in methods}
    records = []
    for m in methods:
        f = fits[m]
        slope, cidx, sq, eflags = evaluate(gen, val, f)
        flags = tuple(sorted(set(f.flags) | set(eflags) | ({"separation"} if sep.separated else set())))
        records.append(ReplicateRecord(
            scenario_id=scenario.scenario_id, replicate=replicate, method=m,
            beta=tuple(float(b) for b in f.beta), lambda_star=f.lambda_star, boundary_hit=f.boundary_hit,
            separated=sep.separated, converged=f.converged, slope=slope, cindex=cidx,
            rmse_pred_contrib=sq, flags=flags,
        ))
    return records
