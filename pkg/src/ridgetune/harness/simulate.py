"""Simulation driver: scenarios x replicates -> record store."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from ..simgen import SEED_SCHEME_VERSION, Calibration, default_calibration, default_correlation
from ..tuning import default_grid
from . import storage
from .config import RunConfig
from .runner import run_replicate

log = logging.getLogger(__name__)

CALIBRATION_FILE = "calibration.json"


class ResumeConflict(RuntimeError):
    pass


def _identity(config: RunConfig) -> dict:
    """Settings that must match for records to be combined in one store."""
    return dict(
        master_seed=config.master_seed,
        grid=[config.grid_n, config.grid_low, config.grid_high],
        methods=list(config.methods),
        gcv_mode=config.gcv_mode,
        rcv_reps=config.rcv_reps,
        seed_scheme=SEED_SCHEME_VERSION,
        correlation_digest=default_correlation().digest(),
    )


def _portable(cal: Calibration) -> Calibration:
    # drop the large calibration sample before shipping to worker processes
    return dataclasses.replace(cal, _sample=None, intercepts=dict(cal.intercepts))


_WORKER = {}


def _init_worker(cal, config_dict):
    _WORKER["cal"] = cal
    _WORKER["config"] = RunConfig(**config_dict)


def _work(task):
    scenario, rep = task
    cfg = _WORKER["config"]
    grid = default_grid(cfg.grid_n, cfg.grid_low, cfg.grid_high)
    return run_replicate(scenario, rep, cfg.master_seed, _WORKER["cal"], cfg.methods, grid,
                         cfg.gcv_mode, cfg.rcv_reps)


def run_simulation(config: RunConfig, resume: bool = False,
                   calibration: Optional[Calibration] = None) -> dict:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = config.scenario_list()
    ident = _identity(config)
    manifest_path = out / storage.MANIFEST_NAME
    existing = manifest_path.exists() or any(out.glob("records_*.csv"))
    if existing and not resume:
        raise ResumeConflict(f"{out} already holds results; pass --resume to continue them")
    if existing and manifest_path.exists():
        old = storage.read_manifest(out)
        if old.get("identity") != ident:
            raise ResumeConflict("existing run used different settings; refusing to mix records")

    cal = default_calibration() if calibration is None else calibration
    for sc in scenarios:
        cal.intercept(sc.K, sc.a, sc.ey)
    cal.save(out / CALIBRATION_FILE)
    shipped = _portable(cal)

    manifest = dict(
        schema_version=storage.RECORD_SCHEMA_VERSION,
        identity=ident,
        config=config.to_dict(),
        correlation_report=_report_summary(),
        scenarios={},
    )
    cfg_dict = config.to_dict()
    pool = None
    if config.workers > 1:
        pool = ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(shipped, cfg_dict))
    else:
        _init_worker(shipped, cfg_dict)
    try:
        for sc in scenarios:
            path = storage.scenario_file(out, sc.scenario_id)
            n_coef = len(sc.covariates) + 1
            done = storage.completed_replicates(path, config.methods)
            if path.exists():
                storage.prune_partial(path, done, n_coef)
            todo = [(sc, r) for r in range(config.n_reps) if r not in done]
            log.info("%s: %d replicates to run, %d already stored", sc.scenario_id, len(todo), len(done))
            results = pool.map(_work, todo, chunksize=1) if pool else map(_work, todo)
            for i, recs in enumerate(results):
                storage.write_records(path, recs, n_coef, append=True)
                if (i + 1) % 25 == 0:
                    log.info("%s: %d/%d", sc.scenario_id, i + 1, len(todo))
            cols = np.array(sc.covariates) - 1
            manifest["scenarios"][sc.scenario_id] = dict(
                N=sc.N, K=sc.K, a=sc.a, ey=sc.ey, noise=sc.noise,
                covariates=list(sc.covariates),
                beta_true=[float(b) for b in sc.a * cal.beta[cols]],
                beta0=float(cal.intercept(sc.K, sc.a, sc.ey)),
                reps=config.n_reps,
                records=path.name,
            )
            storage.write_manifest(out, manifest)
    finally:
        if pool:
            pool.shutdown()
    storage.write_manifest(out, manifest)
    return manifest


def _report_summary() -> dict:
    corr = default_correlation()
    rep = corr.report
    return dict(
        digest=corr.digest(),
        min_eigenvalue_assembled=rep["min_eigenvalue_assembled"],
        min_eigenvalue_repaired=rep["min_eigenvalue_repaired"],
        n_repaired_entries=len(rep["repaired_entries"]),
        corr_z1_z2_assembled=float(corr.assembled[0, 1]),
        corr_z1_z2_repaired=float(corr.matrix[0, 1]),
    )
