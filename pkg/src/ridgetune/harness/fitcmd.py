"""Fit one method to a user CSV file."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from ..glm import Dataset, fit_ml
from ..penalty import (
    IP_LAMBDA,
    WP_LAMBDA,
    PenaltySpec,
    PriorSpec,
    destandardize,
    fit_firth,
    fit_ridge_augmented,
    flic,
    prior_to_lambda,
    standardize,
)
from ..separation import detect_separation
from ..tuning import (
    default_grid,
    df_profile,
    loocv_profile,
    profile_AIC,
    profile_CE,
    profile_D,
    profile_GCV,
    rcv_lambdas,
    ridge_path,
)

FIT_METHODS = ("ML", "FC", "FLIC", "D", "GCV", "CE", "RCV50", "RCV95", "AIC", "IP", "WP", "ridge")


class InputError(ValueError):
    pass


def read_csv_dataset(path, outcome: str):
    """Load a header CSV; every column except ``outcome`` is a numeric covariate."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    if outcome not in header:
        raise InputError(f"outcome column {outcome!r} not in header {header}")
    if not rows:
        raise InputError(f"{path} has no data rows")
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InputError(f"non-numeric value in {path}: {exc}") from None
    if arr.shape[1] != len(header):
        raise InputError("ragged CSV rows")
    j = header.index(outcome)
    y = arr[:, j]
    if not np.all((y == 0) | (y == 1)):
        raise InputError(f"outcome {outcome!r} must be coded 0/1")
    names = [h for i, h in enumerate(header) if i != j]
    X = np.delete(arr, j, axis=1)
    return Dataset.from_covariates(X, y), names


def _profile_rows(prof):
    return [dict(lambda_=float(l), score=float(s) if np.isfinite(s) else None)
            for l, s in zip(prof.grid, prof.scores)]


def fit_dataset(data: Dataset, method: str, lam: Optional[float] = None, prior_or: Optional[float] = None,
                seed: int = 1, gcv_mode: str = "insample") -> dict:
    if method not in FIT_METHODS:
        raise InputError(f"unknown method {method!r}; choose from {list(FIT_METHODS)}")
    if (lam is not None or prior_or is not None) and method != "ridge":
        raise InputError("--lambda and --prior-or apply to method 'ridge' only")
    if method == "ridge" and (lam is None) == (prior_or is None):
        raise InputError("method 'ridge' needs exactly one of --lambda or --prior-or")
    sep = detect_separation(data)
    report = dict(method=method, n=data.n, events=int(data.y.sum()), separated=sep.separated,
                  separation_certificate=None if sep.certificate is None else sep.certificate.tolist(),
                  lambda_star=None, profile=None)
    if method in ("ML", "FC", "FLIC"):
        fit = fit_ml(data) if method == "ML" else fit_firth(data)
        if method == "FLIC":
            if not fit.converged:
                raise InputError("Firth fit did not converge; FLIC is unavailable")
            fit = flic(data, fit)
        beta = fit.beta
    else:
        std_data, std = standardize(data)
        if method in ("IP", "WP", "ridge"):
            if method == "ridge":
                lam = float(lam) if lam is not None else prior_to_lambda(PriorSpec(prior_or))
            else:
                lam = IP_LAMBDA if method == "IP" else WP_LAMBDA
            fit = fit_ridge_augmented(std_data, PenaltySpec(lam))
        else:
            grid = default_grid()
            path = ridge_path(std_data, grid)
            if method in ("RCV50", "RCV95"):
                res = rcv_lambdas(std_data, grid, np.random.default_rng(seed))
                lam = res.quantile(0.5 if method == "RCV50" else 0.95)
                fit = fit_ridge_augmented(std_data, PenaltySpec(lam))
                report["profile"] = [dict(repetition=i, lambda_=float(v)) for i, v in enumerate(res.per_rep)]
            else:
                loo = loocv_profile(std_data, path) if method in ("D", "CE") or gcv_mode == "loocv" else None
                if method == "D":
                    prof = profile_D(std_data, path, loo)
                elif method == "CE":
                    prof = profile_CE(std_data, path, loo)
                elif method == "GCV":
                    prof = profile_GCV(std_data, path, df_profile(path), loo, mode=gcv_mode)
                else:
                    prof = profile_AIC(std_data, path)
                lam = float(prof.selected)
                fit = path.fit_at(prof.selected_index)
                report["profile"] = _profile_rows(prof)
                report["boundary_hit"] = bool(prof.boundary_hit)
        report["lambda_star"] = float(lam)
        beta = destandardize(fit.beta, std)
    pi = 1.0 / (1.0 + np.exp(-(data.X @ beta)))
    converged = bool(fit.converged) and not (method == "ML" and sep.separated)
    report.update(
        coefficients=[float(b) for b in beta],
        mean_predicted=float(pi.mean()),
        event_rate=float(data.y.mean()),
        converged=converged,
        flags=sorted(fit.flags) + (["separation"] if sep.separated else []),
    )
    return report


def format_report(report: dict, names) -> str:
    lines = [f"method: {report['method']}   n = {report['n']}   events = {report['events']}"]
    if report["separated"]:
        lines.append("WARNING: data are separated; unpenalized or weakly penalized estimates are not finite")
    if not report["converged"]:
        lines.append("WARNING: fit did not converge")
    if report["lambda_star"] is not None:
        lines.append(f"lambda*: {report['lambda_star']:.6g}" + ("  (grid boundary)" if report.get("boundary_hit") else ""))
    lines.append("coefficients (original scale):")
    for name, b in zip(["(intercept)"] + list(names), report["coefficients"]):
        lines.append(f"  {name:>14s} {b: .6f}")
    lines.append(f"mean predicted probability: {report['mean_predicted']:.6f} (event rate {report['event_rate']:.6f})")
    lines.append(f"flags: {', '.join(report['flags']) if report['flags'] else 'none'}")
    return "\n".join(lines)


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k.rstrip("_"): _clean(v) for k, v in o.items()}
    if isinstance(o, list):
        return [_clean(v) for v in o]
    return o


def run_fit(data_path, outcome: str, method: str, lam=None, prior_or=None, json_out=None, seed: int = 1,
            gcv_mode: str = "insample"):
    data, names = read_csv_dataset(data_path, outcome)
    report = fit_dataset(data, method, lam, prior_or, seed, gcv_mode)
    report["covariates"] = names
    if json_out is None:
        p = Path(data_path)
        json_out = p.with_name(f"{p.stem}.{method}.fit.json")
    Path(json_out).write_text(json.dumps(_clean(report), indent=2) + "\n")
    return report, format_report(report, names), Path(json_out)
