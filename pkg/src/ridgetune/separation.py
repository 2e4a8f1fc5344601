"""Linear-programming check for complete or quasi-complete separation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .exceptions import SeparationCheckError
from .glm import Dataset

SEPARATION_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SeparationReport:
    separated: bool
    certificate: Optional[np.ndarray]
    objective: float
    message: str = ""

    @property
    def status(self) -> str:
        return "separated" if self.separated else "none"


def detect_separation(data: Dataset, *, raise_on_failure: bool = False) -> SeparationReport:
    """Look for a direction ``b`` with ``(2y_i - 1) x_i.b >= 0`` for every record.

    Solves ``max sum_i (2y_i - 1) x_i.b`` over the box ``-1 <= b_j <= 1``
    subject to those constraints. A strictly positive optimum means some
    linear combination of the covariates orders events above non-events
    without violation, i.e. the data are (quasi-)separated and ``b`` is the
    certificate. Zero-weight records are ignored.

    If the solver fails the report carries ``separated=False`` and the solver
    message, unless ``raise_on_failure`` is set.
    """
    keep = data.w > 0
    X = data.X[keep]
    sgn = 2.0 * data.y[keep] - 1.0
    A = sgn[:, None] * X
    p = X.shape[1]
    res = linprog(
        c=-A.sum(axis=0),
        A_ub=-A,
        b_ub=np.zeros(A.shape[0]),
        bounds=[(-1.0, 1.0)] * p,
        method="highs",
    )
    if res.status != 0:
        if raise_on_failure:
            raise SeparationCheckError(f"separation LP failed: {res.message}")
        return SeparationReport(False, None, np.nan, f"lp_failure: {res.message}")
    value = float(-res.fun)
    if value > SEPARATION_THRESHOLD:
        return SeparationReport(True, np.asarray(res.x, dtype=float), value)
    return SeparationReport(False, None, value)
