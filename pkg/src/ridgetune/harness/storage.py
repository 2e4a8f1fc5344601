"""Append-only CSV record store with a JSON run manifest."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..metrics import ReplicateRecord

RECORD_SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
FIXED_HEAD = ("scenario_id", "replicate", "method", "lambda_star", "boundary_hit", "separated", "converged")
FIXED_TAIL = ("slope", "cindex", "rmse_pred_contrib", "flags")


def record_columns(n_coef: int) -> list:
    return list(FIXED_HEAD) + [f"beta{j}" for j in range(n_coef)] + list(FIXED_TAIL)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def record_row(rec: ReplicateRecord) -> list:
    return (
        [rec.scenario_id, rec.replicate, rec.method, rec.lambda_star, rec.boundary_hit, rec.separated, rec.converged]
        + list(rec.beta)
        + [rec.slope, rec.cindex, rec.rmse_pred_contrib, ";".join(rec.flags)]
    )


def _opt_float(s: str):
    return None if s == "" else float(s)


def _opt_bool(s: str):
    return None if s == "" else s == "1"


def parse_row(row: dict) -> ReplicateRecord:
    n_coef = sum(1 for k in row if k.startswith("beta") and k[4:].isdigit())
    return ReplicateRecord(
        scenario_id=row["scenario_id"],
        replicate=int(row["replicate"]),
        method=row["method"],
        beta=tuple(float(row[f"beta{j}"]) for j in range(n_coef)),
        lambda_star=_opt_float(row["lambda_star"]),
        boundary_hit=_opt_bool(row["boundary_hit"]),
        separated=row["separated"] == "1",
        converged=row["converged"] == "1",
        slope=_opt_float(row["slope"]),
        cindex=_opt_float(row["cindex"]),
        rmse_pred_contrib=_opt_float(row["rmse_pred_contrib"]),
        flags=tuple(f for f in row["flags"].split(";") if f),
    )


def scenario_file(out_dir, scenario_id: str) -> Path:
    return Path(out_dir) / f"records_{scenario_id}.csv"


def write_records(path, records, n_coef: int, append: bool) -> None:
    path = Path(path)
    new = not append or not path.exists()
    with path.open("w" if new else "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(record_columns(n_coef))
        for rec in records:
            w.writerow([_fmt(v) for v in record_row(rec)])


def read_records(path) -> list:
    with Path(path).open(newline="") as fh:
        return [parse_row(r) for r in csv.DictReader(fh)]


def completed_replicates(path, methods) -> set:
    """Replicates holding a record for every method (partial ones are not counted)."""
    path = Path(path)
    if not path.exists():
        return set()
    seen = {}
    for rec in read_records(path):
        seen.setdefault(rec.replicate, set()).add(rec.method)
    want = set(methods)
    return {r for r, ms in seen.items() if want <= ms}


def prune_partial(path, keep: set, n_coef: int) -> None:
    """Rewrite ``path`` keeping only rows of replicates in ``keep``."""
    path = Path(path)
    if not path.exists():
        return
    recs = [r for r in read_records(path) if r.replicate in keep]
    recs.sort(key=lambda r: r.replicate)
    write_records(path, recs, n_coef, append=False)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_manifest(out_dir, manifest: dict) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable)
    (Path(out_dir) / MANIFEST_NAME).write_text(text + "\n")


def read_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no run manifest in {out_dir}")
    return json.loads(path.read_text())
