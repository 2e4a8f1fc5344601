"""Data generation for the simulation study and the one-covariate illustration.

Covariates are transforms of correlated standard normal variables. The
correlation matrix, effect sizes and transforms follow the design
table as far as it is legible; the gaps are filled as documented on
:data:`COVARIATES` and :data:`CORRELATION_ENTRIES`.

Random streams are derived from ``(master_seed, scenario id, replicate,
purpose)`` with SHA-256, so every dataset can be regenerated on its own.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import CalibrationCacheError
from .glm import Dataset, expit

SEED_SCHEME_VERSION = 1
CALIBRATION_VERSION = 1
CALIBRATION_SEED = 20210101
CALIBRATION_DRAWS = 1_000_000
VALIDATION_SIZE = 10_000
SEXTILE_LOG_OR = 0.69
TRUNCATION_IQR_MULTIPLE = 5.0
INTERCEPT_TOL = 1e-3


# -- design table -------------------------------------------------------------------


@dataclass(frozen=True)
class CovariateSpec:
    """One covariate: transform of its latent normal and its true effect.

    ``beta_true`` is None for continuous effects calibrated by the sextile rule.
    """

    index: int
    kind: str
    params: tuple
    beta_true: Optional[float]
    is_noise: bool = False

    @property
    def continuous(self) -> bool:
        return self.kind in {"linear_floor", "exp_floor_max", "exp_scale", "shifted_square"}

    def transform(self, z: np.ndarray) -> np.ndarray:
        k, prm = self.kind, self.params
        if k == "binary_threshold":
            return (z < prm[0]).astype(float)
        if k == "ordinal_two_cut":
            return (z >= prm[0]).astype(float) + (z >= prm[1]).astype(float)
        if k == "linear_floor":
            return np.floor(prm[0] * z + prm[1])
        if k == "exp_floor_max":
            return np.floor(np.maximum(0.0, prm[0] * np.exp(z) - prm[1]))
        if k == "exp_scale":
            return np.exp(prm[0] * z + prm[1])
        if k == "shifted_square":
            return 0.01 * np.floor(100.0 * (z + prm[0]) ** 2)
        raise ValueError(f"unknown transform {k!r}")


# x4's row is illegible: binary at threshold 0 (mean 0.5) is assumed.
# x14 and x15 are listed as transforms of z10; their own latent variables are used.
COVARIATES = (
    CovariateSpec(1, "binary_threshold", (0.84,), 2.08),
    CovariateSpec(2, "binary_threshold", (-0.35,), 1.39),
    CovariateSpec(3, "binary_threshold", (0.0,), 0.69),
    CovariateSpec(4, "binary_threshold", (0.0,), 0.69),
    CovariateSpec(5, "ordinal_two_cut", (-1.2, 0.75), 0.35),
    CovariateSpec(6, "ordinal_two_cut", (0.5, 1.5), 0.35),
    CovariateSpec(7, "linear_floor", (10.0, 55.0), None),
    CovariateSpec(8, "exp_floor_max", (100.0, 20.0), None),
    CovariateSpec(9, "exp_floor_max", (80.0, 20.0), None),
    CovariateSpec(10, "linear_floor", (10.0, 55.0), None),
    CovariateSpec(11, "exp_scale", (0.4, 3.0), 0.0, True),
    CovariateSpec(12, "exp_scale", (0.5, 1.5), 0.0, True),
    CovariateSpec(13, "shifted_square", (4.0,), 0.0, True),
    CovariateSpec(14, "linear_floor", (10.0, 55.0), 0.0, True),
    CovariateSpec(15, "linear_floor", (10.0, 55.0), 0.0, True),
)
N_LATENT = len(COVARIATES)
NOISE_INDICES = (11, 12, 13, 14, 15)
PRINTED_BETA10 = 0.36

# Latent correlations as listed, keyed by the row they appear in.
CORRELATION_ENTRIES = {
    1: [(2, 0.5), (3, 0.5), (7, 0.5), (14, 0.5)],
    2: [(1, 0.5), (14, 0.3)],
    3: [(1, 0.5), (4, -0.5), (5, -0.3), (3, -0.5), (5, 0.5), (7, 0.3), (8, 0.5), (9, 0.3), (14, 0.5)],
    4: [(3, -0.3), (4, 0.5), (8, 0.3), (9, 0.3)],
    5: [(7, -0.3), (8, 0.3), (11, -0.5)],
    6: [(1, 0.5), (4, 0.3), (6, -0.3), (4, 0.5), (5, 0.3), (6, 0.3), (9, 0.5), (12, -0.3), (14, 0.5)],
    7: [(4, 0.3), (5, 0.3), (8, 0.5), (14, 0.3)],
    8: [(4, 0.3), (5, 0.3), (8, 0.5), (14, 0.3)],
    9: [],
    10: [(6, -0.5), (12, 0.3), (15, 0.5)],
    11: [(8, -0.3), (11, 0.3), (15, 0.5)],
    12: [],
    13: [(1, 0.5), (2, 0.3), (4, 0.5), (8, 0.5), (9, 0.3)],
    14: [(11, 0.5), (12, 0.5)],
    15: [],
}


@dataclass(frozen=True)
class LatentCorrelation:
    matrix: np.ndarray
    cholesky: np.ndarray
    assembled: np.ndarray
    report: dict = field(default_factory=dict, compare=False)

    def digest(self) -> str:
        return hashlib.sha256(np.round(self.matrix, 12).tobytes()).hexdigest()[:16]


def assemble_correlation(entries=None, size: int = N_LATENT):
    """Symmetric matrix from row-wise entries (1-based indices).

    Every value listed for an unordered pair, from either row, is averaged;
    self-references are dropped. Returns ``(matrix, report)``.
    """
    entries = CORRELATION_ENTRIES if entries is None else entries
    values = defaultdict(list)
    dropped = []
    for i, row in entries.items():
        for j, c in row:
            if i == j:
                dropped.append((i, j, c))
                continue
            values[tuple(sorted((i, j)))].append(float(c))
    S = np.eye(size)
    conflicts = {}
    for (i, j), v in values.items():
        S[i - 1, j - 1] = S[j - 1, i - 1] = float(np.mean(v))
        if len(set(v)) > 1:
            conflicts[f"{i}-{j}"] = v
    return S, {"self_references_dropped": dropped, "averaged_conflicts": conflicts}


def repair_correlation(S, min_eig: float = 1e-6):
    """Clip eigenvalues at ``min_eig`` and rescale back to unit diagonal."""
    S = 0.5 * (S + S.T)
    ev, vec = np.linalg.eigh(S)
    if ev[0] >= min_eig:
        return S.copy(), []
    R = S
    # rescaling to unit diagonal can push the smallest eigenvalue back under
    # the floor, so clip and rescale until it holds
    for _ in range(100):
        ev, vec = np.linalg.eigh(R)
        if ev[0] >= min_eig:
            break
        R = (vec * np.maximum(ev, min_eig * 1.01)) @ vec.T
        d = np.sqrt(np.diag(R))
        R = R / np.outer(d, d)
        R = 0.5 * (R + R.T)
        np.fill_diagonal(R, 1.0)
    changed = [
        (i + 1, j + 1, float(S[i, j]), float(R[i, j]))
        for i, j in zip(*np.triu_indices_from(S, 1))
        if abs(R[i, j] - S[i, j]) > 1e-12
    ]
    return R, changed


def build_correlation(entries=None, size: int = N_LATENT) -> LatentCorrelation:
    """Assemble, repair to positive definite, and factor the latent correlation."""
    assembled, report = assemble_correlation(entries, size)
    ev_before = float(np.linalg.eigvalsh(assembled)[0])
    R, changed = repair_correlation(assembled)
    L = np.linalg.cholesky(R)
    report = dict(report)
    report["min_eigenvalue_assembled"] = ev_before
    report["min_eigenvalue_repaired"] = float(np.linalg.eigvalsh(R)[0])
    report["repaired_entries"] = changed
    return LatentCorrelation(R, L, assembled, report)


@lru_cache(maxsize=1)
def default_correlation() -> LatentCorrelation:
    return build_correlation()


# -- random streams -------------------------------------------------------------------


def derive_rng(master_seed: int, scenario_id: str, replicate: int, purpose: str) -> np.random.Generator:
    """Independent generator for one (scenario, replicate, purpose) triple."""
    key = f"v{SEED_SCHEME_VERSION}|{int(master_seed)}|{scenario_id}|{int(replicate)}|{purpose}"
    digest = hashlib.sha256(key.encode()).digest()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int.from_bytes(digest[:16], "little"))))


# -- covariates -----------------------------------------------------------------------


def sample_latent(n: int, rng: np.random.Generator, corr: Optional[LatentCorrelation] = None) -> np.ndarray:
    corr = default_correlation() if corr is None else corr
    return rng.standard_normal((n, corr.matrix.shape[0])) @ corr.cholesky.T


def raw_transform(Z: np.ndarray) -> np.ndarray:
    """Apply the covariate transforms column-wise, without truncation."""
    return np.column_stack([spec.transform(Z[:, spec.index - 1]) for spec in COVARIATES])


@dataclass
class Calibration:
    """Quartiles, truncation bounds, sextile spreads and effects per covariate.

    Also memoizes calibrated intercepts per scenario cell. Everything derives
    from one large latent sample drawn with ``seed``.
    """

    seed: int
    n_draws: int
    q1: np.ndarray
    q3: np.ndarray
    upper: np.ndarray
    sextile_spread: np.ndarray
    beta: np.ndarray
    correlation_digest: str
    intercepts: dict = field(default_factory=dict)
    version: int = CALIBRATION_VERSION
    _sample: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def compute(cls, seed: int = CALIBRATION_SEED, n_draws: int = CALIBRATION_DRAWS,
                corr: Optional[LatentCorrelation] = None, beta10_printed: bool = False) -> "Calibration":
        corr = default_correlation() if corr is None else corr
        rng = np.random.Generator(np.random.PCG64(seed))
        X = raw_transform(sample_latent(n_draws, rng, corr))
        q1, q3 = np.quantile(X, [0.25, 0.75], axis=0)
        upper = np.full(N_LATENT, np.inf)
        for spec in COVARIATES:
            if spec.continuous:
                k = spec.index - 1
                upper[k] = q3[k] + TRUNCATION_IQR_MULTIPLE * (q3[k] - q1[k])
        X = np.minimum(X, upper)
        lo, hi = np.quantile(X, [1.0 / 6.0, 5.0 / 6.0], axis=0)
        spread = hi - lo
        beta = np.empty(N_LATENT)
        for spec in COVARIATES:
            k = spec.index - 1
            if spec.beta_true is not None:
                beta[k] = spec.beta_true
            else:
                if not spread[k] > 0:
                    raise CalibrationCacheError(f"degenerate sextile spread for x{spec.index}")
                beta[k] = SEXTILE_LOG_OR / spread[k]
        if beta10_printed:
            beta[9] = PRINTED_BETA10
        return cls(seed, n_draws, q1, q3, upper, spread, beta, corr.digest(), _sample=X)

    def sample(self) -> np.ndarray:
        """The truncated calibration sample (regenerated if loaded from disk)."""
        if self._sample is None:
            fresh = Calibration.compute(self.seed, self.n_draws)
            if fresh.correlation_digest != self.correlation_digest:
                raise CalibrationCacheError("calibration was built with a different correlation matrix")
            self._sample = fresh._sample
        return self._sample

    def truncate(self, X: np.ndarray) -> np.ndarray:
        return np.minimum(X, self.upper)

    def intercept(self, K: int, a: float, ey: float) -> float:
        key = f"K{K}_a{a:g}_ey{ey:g}"
        if key not in self.intercepts:
            self.intercepts[key] = calibrate_intercept_on(self.sample()[:, :K], a * self.beta[:K], ey)
        return self.intercepts[key]

    def to_dict(self) -> dict:
        rows = [
            dict(covariate=spec.index, q1=float(self.q1[k]), q3=float(self.q3[k]),
                 truncation_bound=None if not np.isfinite(self.upper[k]) else float(self.upper[k]),
                 sextile_spread=float(self.sextile_spread[k]), beta=float(self.beta[k]))
            for k, spec in enumerate(COVARIATES)
        ]
        return dict(version=self.version, seed=self.seed, n_draws=self.n_draws,
                    correlation_digest=self.correlation_digest, covariates=rows,
                    intercepts=dict(sorted(self.intercepts.items())))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Calibration":
        path = Path(path)
        if not path.exists():
            raise CalibrationCacheError(f"calibration cache {path} not found")
        d = json.loads(path.read_text())
        if d.get("version") != CALIBRATION_VERSION:
            raise CalibrationCacheError(f"calibration cache version {d.get('version')} is not supported")
        rows = sorted(d["covariates"], key=lambda r: r["covariate"])
        return cls(
            seed=d["seed"], n_draws=d["n_draws"],
            q1=np.array([r["q1"] for r in rows]), q3=np.array([r["q3"] for r in rows]),
            upper=np.array([np.inf if r["truncation_bound"] is None else r["truncation_bound"] for r in rows]),
            sextile_spread=np.array([r["sextile_spread"] for r in rows]),
            beta=np.array([r["beta"] for r in rows]),
            correlation_digest=d["correlation_digest"],
            intercepts=dict(d.get("intercepts", {})),
        )


@lru_cache(maxsize=1)
def default_calibration() -> Calibration:
    return Calibration.compute()


def sample_transform(n: int, rng: np.random.Generator, calibration: Optional[Calibration] = None) -> np.ndarray:
    """Draw ``n`` rows of all 15 covariates, truncating the continuous ones."""
    if calibration is None:
        raise CalibrationCacheError("sample_transform needs a calibration (see Calibration.compute)")
    return calibration.truncate(raw_transform(sample_latent(n, rng)))


def calibrate_effects(calibration: Optional[Calibration] = None) -> np.ndarray:
    """True effects of x1..x15 before the effect multiplier."""
    return (default_calibration() if calibration is None else calibration).beta.copy()


def calibrate_intercept_on(X: np.ndarray, beta: np.ndarray, ey: float, tol: float = INTERCEPT_TOL) -> float:
    """Bisection for the intercept giving mean ``expit(b0 + X beta) = ey``."""
    eta = X @ beta if X.size else np.zeros(1)
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = float(np.mean(expit(mid + eta)))
        if abs(m - ey) <= tol * 1e-3 or hi - lo < 1e-12:
            break
        if m < ey:
            lo = mid
        else:
            hi = mid
    return mid


# -- scenarios ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    N: int
    K: int
    a: float
    ey: float
    noise: bool

    def __post_init__(self):
        if self.K < 1 or self.K > 10:
            raise ValueError("K must lie between 1 and 10")
        if self.N < 2:
            raise ValueError("N must be at least 2")

    @property
    def scenario_id(self) -> str:
        return f"K{self.K}_N{self.N}_a{self.a:g}_ey{self.ey:g}_noise{int(self.noise)}"

    @property
    def covariates(self) -> tuple:
        """1-based covariate indices entering the model."""
        base = tuple(range(1, self.K + 1))
        return base + NOISE_INDICES if self.noise else base

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        """Parse ``"N,K,a,ey,noise"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError("scenario must be given as N,K,a,ey,noise")
        N, K, a, ey, noise = parts
        return cls(int(N), int(K), float(a), float(ey), noise.lower() in {"1", "true", "yes"})


def all_scenarios() -> list:
    """The 72-cell factorial design."""
    return [
        ScenarioConfig(N, K, a, ey, noise)
        for ey, K, N, a, noise in itertools.product((0.1, 0.25), (2, 5, 10), (100, 250, 500), (1.0, 0.5), (False, True))
    ]


@dataclass
class GeneratedDataset:
    data: Dataset
    pi_true: np.ndarray
    beta_true: np.ndarray
    beta0: float
    covariates: tuple = ()

    def linear_predictor_true(self) -> np.ndarray:
        return self.beta0 + self.data.X[:, 1:] @ self.beta_true


def _generate(scenario: ScenarioConfig, n: int, rng, calibration: Calibration) -> GeneratedDataset:
    cols = np.array(scenario.covariates) - 1
    X = sample_transform(n, rng, calibration)[:, cols]
    beta = scenario.a * calibration.beta[cols]
    beta0 = calibration.intercept(scenario.K, scenario.a, scenario.ey)
    pi = expit(beta0 + X @ beta)
    y = (rng.random(n) < pi).astype(float)
    return GeneratedDataset(Dataset.from_covariates(X, y), pi, beta, beta0, tuple(scenario.covariates))


def generate_dataset(scenario: ScenarioConfig, replicate: int, master_seed: int,
                     calibration: Optional[Calibration] = None) -> GeneratedDataset:
    calibration = default_calibration() if calibration is None else calibration
    rng = derive_rng(master_seed, scenario.scenario_id, replicate, "train")
    return _generate(scenario, scenario.N, rng, calibration)


def generate_validation(scenario: ScenarioConfig, replicate: int, master_seed: int,
                        calibration: Optional[Calibration] = None, size: int = VALIDATION_SIZE) -> GeneratedDataset:
    """Independent validation sample from the same population, with fresh outcomes."""
    calibration = default_calibration() if calibration is None else calibration
    rng = derive_rng(master_seed, scenario.scenario_id, replicate, "validation")
    return _generate(scenario, size, rng, calibration)


# -- one-covariate illustration ---------------------------------------------------------------

ILLUSTRATION_INTERCEPT = -3.05
ILLUSTRATION_SLOPE = 1.0
ILLUSTRATION_EXPOSURE = 0.8


def illustrative_generator(rng: np.random.Generator, n: int = 100) -> GeneratedDataset:
    """Binary exposure with mean 0.8 and a rare outcome with log odds ``-3.05 + x``."""
    x = (rng.random(n) < ILLUSTRATION_EXPOSURE).astype(float)
    pi = expit(ILLUSTRATION_INTERCEPT + ILLUSTRATION_SLOPE * x)
    y = (rng.random(n) < pi).astype(float)
    return GeneratedDataset(
        Dataset.from_covariates(x, y), pi, np.array([ILLUSTRATION_SLOPE]), ILLUSTRATION_INTERCEPT, (1,)
    )


# 2x2 tables of the two worked example datasets: (x=0: non-events, events), (x=1: non-events, events)
ILLUSTRATIVE_TABLES = {1: ((20, 0), (71, 9)), 2: ((19, 1), (71, 9))}


def illustrative_dataset(which: int) -> Dataset:
    """The fixed example dataset 1 (separated) or 2 (one event among the unexposed)."""
    (a0, a1), (b0, b1) = ILLUSTRATIVE_TABLES[which]
    x = np.r_[np.zeros(a0 + a1), np.ones(b0 + b1)]
    y = np.r_[np.zeros(a0), np.ones(a1), np.zeros(b0), np.ones(b1)]
    return Dataset.from_covariates(x, y)
