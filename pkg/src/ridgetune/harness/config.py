"""Run configuration for the simulation driver."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..simgen import ScenarioConfig, all_scenarios
from ..tuning import GRID_HIGH, GRID_LOW, N_GRID
from .runner import ALL_METHODS

DESK_REPS = 200
FULL_REPS = 1000
DEFAULT_SEED = 20240601
GCV_MODES = ("insample", "loocv")


@dataclass
class RunConfig:
    scenarios: list = field(default_factory=lambda: ["all"])
    reps: Optional[int] = None
    full_scale: bool = False
    master_seed: int = DEFAULT_SEED
    grid_n: int = N_GRID
    grid_low: float = GRID_LOW
    grid_high: float = GRID_HIGH
    methods: list = field(default_factory=lambda: list(ALL_METHODS))
    gcv_mode: str = "insample"
    out: str = "results"
    workers: int = 1
    rcv_reps: int = 50

    def __post_init__(self):
        if not self.methods:
            raise ValueError("method list is empty")
        bad = [m for m in self.methods if m not in ALL_METHODS]
        if bad:
            raise ValueError(f"unknown method ids {bad}; choose from {list(ALL_METHODS)}")
        if self.gcv_mode not in GCV_MODES:
            raise ValueError(f"gcv_mode must be one of {GCV_MODES}")
        if self.reps is not None and self.reps < 1:
            raise ValueError("reps must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        self.methods = [m for m in ALL_METHODS if m in set(self.methods)]

    @property
    def n_reps(self) -> int:
        if self.reps is not None:
            return self.reps
        return FULL_REPS if self.full_scale else DESK_REPS

    def scenario_list(self) -> list:
        out = []
        for s in self.scenarios:
            if s == "all":
                out.extend(all_scenarios())
            elif isinstance(s, ScenarioConfig):
                out.append(s)
            else:
                out.append(ScenarioConfig.parse(s))
        seen, uniq = set(), []
        for s in out:
            if s.scenario_id not in seen:
                seen.add(s.scenario_id)
                uniq.append(s)
        return uniq

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**raw)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["scenarios"] = [s.scenario_id if isinstance(s, ScenarioConfig) else s for s in self.scenarios]
        return d
