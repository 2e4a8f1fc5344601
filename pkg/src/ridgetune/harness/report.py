"""Aggregate a record store into summary tables."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..metrics import (
    PRED_SCALE,
    mad,
    rmsd_log_slope,
    rmse_coef_detail,
    spearman,
    winsorize_slopes,
)
from . import storage

REPORT_SCHEMA_VERSION = 1
SCENARIO_KEYS = ("scenario_id", "N", "K", "a", "ey", "noise")

WIDE_TABLES = (
    "rmse_beta1",
    "rmse_beta1_incl",
    "rmse_beta2",
    "rmse_pred_x1e4",
    "slope_median",
    "rmsd_log_slope",
    "cindex_mean_x1000",
    "lambda_mad",
    "boundary_rate",
    "spearman_logslope_lambda",
)


class EmptyStoreError(ValueError):
    pass


def _coef_cells(recs, idx: int, truth: Optional[float], label: str) -> dict:
    if truth is None:
        return {}
    est = np.array([r.beta[idx] if r.converged else np.nan for r in recs])
    allv = np.array([r.beta[idx] for r in recs])
    out = {}
    if np.isfinite(est).any():
        det = rmse_coef_detail(est, truth)
        out[label] = det.excluded_nonfinite
        out[label + "_excluded_pct"] = 100.0 * det.excluded_fraction
    else:
        out[label] = math.nan
        out[label + "_excluded_pct"] = 100.0
    fin = np.isfinite(allv)
    out[label + "_incl"] = (
        math.sqrt(float(np.mean((allv - truth) ** 2))) if fin.all() else math.inf
    )
    return out


def summarize_method(recs, beta_true) -> dict:
    """Aggregate one scenario x method group of ReplicateRecords."""
    row = dict(n_reps=len(recs))
    row["nonconverged_pct"] = 100.0 * float(np.mean([not r.converged for r in recs]))
    row.update(_coef_cells(recs, 1, beta_true[0] if len(beta_true) > 0 else None, "rmse_beta1"))
    row.update(_coef_cells(recs, 2, beta_true[1] if len(beta_true) > 1 else None, "rmse_beta2"))
    sq = [r.rmse_pred_contrib for r in recs if r.rmse_pred_contrib is not None]
    row["rmse_pred_x1e4"] = PRED_SCALE * math.sqrt(float(np.mean(sq))) if sq else math.nan
    slopes = np.array([r.slope for r in recs if r.slope is not None])
    if slopes.size:
        row["slope_median"] = float(np.median(slopes))
        row["slope_p05"], row["slope_p95"] = (float(q) for q in np.quantile(slopes, [0.05, 0.95]))
        row["rmsd_log_slope"] = rmsd_log_slope(slopes)
    ci = np.array([r.cindex for r in recs if r.cindex is not None])
    if ci.size:
        row["cindex_mean_x1000"] = 1000.0 * float(ci.mean())
        row["cindex_sd_x1000"] = 1000.0 * float(ci.std(ddof=1)) if ci.size > 1 else math.nan
    lam = [(r.lambda_star, r.slope) for r in recs if r.lambda_star is not None]
    if lam:
        lv = np.array([v for v, _ in lam])
        row["lambda_median"] = float(np.median(lv))
        row["lambda_mad"] = mad(lv)
        hits = [r.boundary_hit for r in recs if r.boundary_hit is not None]
        row["boundary_rate"] = float(np.mean(hits)) if hits else math.nan
        pairs = [(v, s) for v, s in lam if s is not None]
        if len(pairs) > 2 and np.ptp([v for v, _ in pairs]) > 0:
            ls = np.log(winsorize_slopes([s for _, s in pairs]))
            row["spearman_logslope_lambda"] = spearman([v for v, _ in pairs], ls)
    return row


def load_store(in_dir):
    manifest = storage.read_manifest(in_dir)
    records = []
    for sid, meta in manifest.get("scenarios", {}).items():
        path = Path(in_dir) / meta["records"]
        if path.exists():
            records.extend(storage.read_records(path))
    return manifest, records


def build_report(manifest: dict, records, methods: Optional[Sequence[str]] = None):
    """Long-format rows (one per scenario x method) and per-scenario separation rows."""
    if methods is not None and len(methods) == 0:
        raise ValueError("method filter is empty")
    if not records:
        raise EmptyStoreError("record store is empty")
    groups = defaultdict(list)
    for r in records:
        if methods is None or r.method in methods:
            groups[(r.scenario_id, r.method)].append(r)
    if not groups:
        raise EmptyStoreError("no records match the method filter")
    order = {m: i for i, m in enumerate(manifest.get("config", {}).get("methods", []))}
    long_rows = []
    for (sid, m) in sorted(groups, key=lambda k: (k[0], order.get(k[1], 99), k[1])):
        meta = manifest["scenarios"][sid]
        row = {k: meta.get(k, sid) if k != "scenario_id" else sid for k in SCENARIO_KEYS}
        row["method"] = m
        row.update(summarize_method(groups[(sid, m)], meta["beta_true"]))
        long_rows.append(row)
    sep = {}
    for r in records:
        sep.setdefault(r.scenario_id, {})[r.replicate] = r.separated
    sep_rows = []
    for sid in sorted(sep):
        meta = manifest["scenarios"][sid]
        row = {k: meta.get(k, sid) if k != "scenario_id" else sid for k in SCENARIO_KEYS}
        row["n_reps"] = len(sep[sid])
        row["SP_pct"] = 100.0 * float(np.mean(list(sep[sid].values())))
        sep_rows.append(row)
    return long_rows, sep_rows


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return v


def _write(path: Path, rows, columns):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, math.nan)) for c in columns])


def wide_table(long_rows, measure: str):
    methods = []
    for r in long_rows:
        if r["method"] not in methods:
            methods.append(r["method"])
    by_sid = {}
    for r in long_rows:
        row = by_sid.setdefault(r["scenario_id"], {k: r[k] for k in SCENARIO_KEYS})
        row[r["method"]] = r.get(measure, math.nan)
    return list(by_sid.values()), list(SCENARIO_KEYS) + methods


def write_report(in_dir, out_dir, methods: Optional[Sequence[str]] = None) -> list:
    manifest, records = load_store(in_dir)
    long_rows, sep_rows = build_report(manifest, records, methods)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(SCENARIO_KEYS) + ["method"]
    for r in long_rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    written = []
    p = out / "summary_long.csv"
    _write(p, long_rows, cols)
    written.append(p)
    p = out / "table_separation.csv"
    _write(p, sep_rows, list(SCENARIO_KEYS) + ["n_reps", "SP_pct"])
    written.append(p)
    for measure in WIDE_TABLES:
        rows, wcols = wide_table(long_rows, measure)
        p = out / f"table_{measure}.csv"
        _write(p, rows, wcols)
        written.append(p)
    return written
