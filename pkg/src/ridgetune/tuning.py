"""Selection of the ridge complexity parameter.

The expensive parts are the leave-one-out and k-fold refits over the whole
lambda grid. Both are run through :func:`ridgetune.glm.fit_ml_batch` on the
distinct (row, outcome, weight) records of the data, so duplicate records
(common with binary covariates) are refitted only once. The results are
identical to brute-force refitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import SelectionError
from .glm import GRAD_TOL, MAX_ITER, Dataset, FitResult, clip_probabilities, expit, fit_ml_batch
from .penalty import DEFAULT_RESCALE, PenaltySpec, Standardizer, destandardize, fit_ridge_augmented, pseudo_records

N_GRID = 200
GRID_LOW = 1e-6
GRID_HIGH = 100.0
N_FOLDS = 10
RCV_REPS = 50

MIN_SMALLEST = "min_smallest"
MIN_LARGEST = "min_largest"


def default_grid(n: int = N_GRID, low: float = GRID_LOW, high: float = GRID_HIGH) -> np.ndarray:
    """Log-linearly equidistant lambda values from ``low`` to ``high`` (ascending)."""
    grid = np.logspace(np.log10(low), np.log10(high), n)
    grid[0], grid[-1] = low, high
    return grid


@dataclass
class CriterionProfile:
    """Criterion values over a lambda grid and the selected lambda."""

    name: str
    grid: np.ndarray
    scores: np.ndarray
    selected_index: int
    rule: str = MIN_SMALLEST
    nonconverged: np.ndarray = None
    clipped: np.ndarray = None

    @property
    def selected(self) -> float:
        return float(self.grid[self.selected_index])

    @property
    def boundary_hit(self) -> bool:
        return self.selected_index in (0, len(self.grid) - 1)


def select_lambda(scores, rule: str = MIN_SMALLEST) -> int:
    """Index of the minimizing grid point.

    ``min_smallest`` returns the first (smallest lambda) minimizer,
    ``min_largest`` the last one. Non-finite scores are ignored.
    """
    scores = np.asarray(scores, dtype=float)
    finite = np.isfinite(scores)
    if not finite.any():
        raise SelectionError("all criterion values are non-finite")
    best = np.min(scores[finite])
    hits = np.flatnonzero(finite & (scores == best))
    if rule == MIN_SMALLEST:
        return int(hits[0])
    if rule == MIN_LARGEST:
        return int(hits[-1])
    raise ValueError(f"unknown tie rule {rule!r}")


# -- full-data path -------------------------------------------------------------


@dataclass
class RidgePath:
    """Full-data ridge fits at every grid value (standardized scale)."""

    grid: np.ndarray
    betas: np.ndarray
    loglik: np.ndarray
    converged: np.ndarray
    fits: list = field(repr=False, default_factory=list)

    def fit_at(self, index: int) -> FitResult:
        return self.fits[index]

    def predictions(self, X) -> np.ndarray:
        """Matrix (G, N) of fitted probabilities on design ``X``."""
        return expit(self.betas @ np.asarray(X, dtype=float).T)


def ridge_path(std_data: Dataset, grid=None, *, rescale_s: float = DEFAULT_RESCALE) -> RidgePath:
    """Fit the augmented ridge model at every grid value.

    Fits run from the largest lambda down, each warm-started at the previous
    solution, which keeps the separated, weakly penalized end stable.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    G = grid.shape[0]
    fits = [None] * G
    init = None
    for j in range(G - 1, -1, -1):
        fit = fit_ridge_augmented(std_data, PenaltySpec(grid[j], rescale_s), init=init)
        fits[j] = fit
        init = fit.beta
    return RidgePath(
        grid=grid,
        betas=np.array([f.beta for f in fits]),
        loglik=np.array([f.loglik for f in fits]),
        converged=np.array([f.converged for f in fits]),
        fits=fits,
    )


# -- resampling engines -----------------------------------------------------------


def _distinct_records(data: Dataset):
    """Distinct (x, y, w) records: (rows, y, w, inverse index, counts)."""
    key = np.column_stack([data.X, data.y, data.w])
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    p = data.n_coef
    return uniq[:, :p], uniq[:, p], uniq[:, p + 1], inverse.ravel(), counts


@dataclass
class CVPredictions:
    """Out-of-sample probabilities with per-observation fit diagnostics."""

    probs: np.ndarray
    converged: np.ndarray
    clipped: np.ndarray


# cap on weight-matrix cells per batched leave-one-out call
LOO_BATCH_CELLS = 2_000_000


def _augmented_rows(n_coef, lam, rescale_s):
    return pseudo_records(n_coef, PenaltySpec(lam, rescale_s))


def _loo_at(rows, ry, rw, counts, lam, init, rescale_s, max_iter, tol):
    U, p = rows.shape
    prow, py, pw = _augmented_rows(p, lam, rescale_s)
    X = np.vstack([rows, prow])
    y = np.concatenate([ry, py])
    base = np.concatenate([counts * rw, pw])
    W = np.tile(base, (U, 1))
    W[np.arange(U), np.arange(U)] -= rw
    beta, conv, _, _ = fit_ml_batch(X, y, W, init, max_iter=max_iter, tol=tol)
    raw = expit(np.einsum("ij,ij->i", rows, beta))
    probs, _ = clip_probabilities(raw)
    return probs, conv, probs != raw


def loocv_predictions(
    std_data: Dataset,
    lam: float,
    init=None,
    *,
    rescale_s: float = DEFAULT_RESCALE,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
) -> CVPredictions:
    """Leave-one-out probabilities from the augmented ridge fit at ``lam``.

    Each leave-one-out fit starts from ``init`` (the full-data fit by default).
    Non-converged fits contribute their last iterate and are flagged.
    """
    if init is None:
        init = fit_ridge_augmented(std_data, PenaltySpec(lam, rescale_s)).beta
    rows, ry, rw, inverse, counts = _distinct_records(std_data)
    probs, conv, clipped = _loo_at(rows, ry, rw, counts, lam, init, rescale_s, max_iter, tol)
    return CVPredictions(probs[inverse], conv[inverse], clipped[inverse])


def loocv_profile(std_data: Dataset, path: RidgePath, *, rescale_s: float = DEFAULT_RESCALE):
    """Leave-one-out probabilities at every grid value.

    Grid values are solved together in chunks: the pseudo-records are the same
    rows at every lambda with only their weights changing, so each chunk is a
    single batched fit.

    Returns
    -------
    probs, converged, clipped : ndarray, shape (G, N)
    """
    rows, ry, rw, inverse, counts = _distinct_records(std_data)
    U, p = rows.shape
    grid = path.grid
    G = grid.shape[0]
    prow, py, _ = _augmented_rows(p, 1.0, rescale_s)
    X = np.vstack([rows, prow])
    y = np.concatenate([ry, py])
    unit_w = _augmented_rows(p, 1.0, rescale_s)[2]
    base = np.concatenate([counts * rw, np.zeros(prow.shape[0])])
    base_W = np.tile(base, (U, 1))
    base_W[np.arange(U), np.arange(U)] -= rw
    chunk = max(1, LOO_BATCH_CELLS // (U * X.shape[0]))
    out_p = np.empty((G, U))
    out_c = np.empty((G, U), dtype=bool)
    for a in range(0, G, chunk):
        lams = grid[a : a + chunk]
        W = np.tile(base_W, (lams.size, 1))
        W[:, U:] = np.repeat(lams, U)[:, None] * unit_w
        init = np.repeat(path.betas[a : a + chunk], U, axis=0)
        beta, conv, _, _ = fit_ml_batch(X, y, W, init)
        eta = np.einsum("ij,ij->i", np.tile(rows, (lams.size, 1)), beta)
        out_p[a : a + lams.size] = expit(eta).reshape(lams.size, U)
        out_c[a : a + lams.size] = conv.reshape(lams.size, U)
    probs, _ = clip_probabilities(out_p)
    clipped = probs != out_p
    return probs[:, inverse], out_c[:, inverse], clipped[:, inverse]


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index per observation; ``stratified`` is False when events were too few."""

    folds: np.ndarray
    n_folds: int = N_FOLDS
    stratified: bool = True


def stratified_folds(y, rng: np.random.Generator, n_folds: int = N_FOLDS) -> FoldAssignment:
    """Random fold labels with events and non-events spread evenly across folds.

    Events are shuffled and dealt round-robin, and the non-events continue the
    deal where the events stopped, so both per-fold counts differ by at most
    one and fold sizes stay balanced. With fewer events than folds the
    assignment is an unstratified balanced shuffle.
    """
    y = np.asarray(y)
    n = y.shape[0]
    folds = np.empty(n, dtype=int)
    events = np.flatnonzero(y == 1)
    if events.size < n_folds:
        order = rng.permutation(n)
        folds[order] = np.arange(n) % n_folds
        return FoldAssignment(folds, n_folds, stratified=False)
    nonevents = np.flatnonzero(y == 0)
    ev = rng.permutation(events)
    ne = rng.permutation(nonevents)
    folds[ev] = np.arange(ev.size) % n_folds
    folds[ne] = (ev.size + np.arange(ne.size)) % n_folds
    return FoldAssignment(folds, n_folds, stratified=True)


def cv_deviance_profiles(
    std_data: Dataset,
    grid,
    assignments,
    *,
    rescale_s: float = DEFAULT_RESCALE,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
):
    """K-fold cross-validated deviance over the grid for several fold assignments.

    Returns
    -------
    deviance : ndarray, shape (R, G)
        One row per assignment.
    nonconverged : ndarray, shape (R, G)
        Count of non-converged fold fits.
    """
    grid = np.asarray(grid, dtype=float)
    rows, ry, rw, inverse, counts = _distinct_records(std_data)
    U, p = rows.shape
    R = len(assignments)
    n_folds = assignments[0].n_folds
    # held[f, u]: weighted count of distinct record u in the held-out part of fit f
    held = np.zeros((R * n_folds, U))
    for r, a in enumerate(assignments):
        np.add.at(held, (r * n_folds + a.folds, inverse), 1.0)
    held *= rw
    train = counts * rw - held
    F = R * n_folds
    dev = np.empty((R, grid.shape[0]))
    bad = np.zeros((R, grid.shape[0]), dtype=int)
    beta = np.zeros((F, p))
    for j in range(grid.shape[0] - 1, -1, -1):
        prow, py, pw = _augmented_rows(p, grid[j], rescale_s)
        X = np.vstack([rows, prow])
        y = np.concatenate([ry, py])
        W = np.hstack([train, np.tile(pw, (F, 1))])
        beta, conv, _, _ = fit_ml_batch(X, y, W, beta, max_iter=max_iter, tol=tol)
        probs, _ = clip_probabilities(expit(beta @ rows.T))
        ll = held * (ry * np.log(probs) + (1.0 - ry) * np.log1p(-probs))
        dev[:, j] = -2.0 * ll.sum(axis=1).reshape(R, n_folds).sum(axis=1)
        bad[:, j] = (~conv).reshape(R, n_folds).sum(axis=1)
    return dev, bad


# -- criteria ---------------------------------------------------------------------


def criterion_D(pi_loo, y) -> float:
    """Cross-validated deviance ``-2 sum(y log p + (1-y) log(1-p))`` on clipped p."""
    p, _ = clip_probabilities(pi_loo)
    y = np.asarray(y, dtype=float)
    return float(-2.0 * np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def criterion_CE(pi_loo, y, c: Optional[float] = None) -> float:
    """Classification error at cut-off ``c`` (default: observed event rate), ties count 1/2."""
    p = np.asarray(pi_loo, dtype=float)
    y = np.asarray(y, dtype=float)
    if c is None:
        c = float(np.mean(y))
    if not 0 < c < 1:
        raise ValueError(f"cut-off must lie in (0, 1), got {c}")
    tie = np.abs(p - c) <= 1e-12
    below = (p < c) & ~tie
    above = (p > c) & ~tie
    err = y * below + (1.0 - y) * above + 0.5 * tie
    return float(np.mean(err))


def penalty_matrix(n_coef: int) -> np.ndarray:
    P = np.eye(n_coef)
    P[0, 0] = 0.0
    return P


def effective_df(fisher, lam: float) -> float:
    """``trace(I (I + lam P)^-1)`` with the intercept unpenalized."""
    fisher = np.asarray(fisher, dtype=float)
    pen = fisher + lam * penalty_matrix(fisher.shape[0])
    return float(np.trace(np.linalg.solve(pen.T, fisher.T).T))


def criterion_GCV(n_obs: int, deviance: float, df_e: float) -> float:
    """``N D / (N - df_e)^2``."""
    if df_e >= n_obs:
        raise ValueError(f"df_e={df_e} must be below N={n_obs}")
    return float(n_obs * deviance / (n_obs - df_e) ** 2)


def criterion_AIC(loglik: float, df_e: float) -> float:
    """``-2 l(beta) + 2 df_e`` with the unpenalized log-likelihood."""
    return float(-2.0 * loglik + 2.0 * df_e)


def aic_at(std_data: Dataset, lam: float, init=None, *, rescale_s: float = DEFAULT_RESCALE) -> float:
    """AIC of the augmented ridge fit at ``lam``; +inf if the fit does not converge."""
    fit = fit_ridge_augmented(std_data, PenaltySpec(lam, rescale_s), init=init)
    if not fit.converged:
        return np.inf
    return criterion_AIC(fit.loglik, effective_df(fit.fisher, lam))


# -- profiles over the grid ---------------------------------------------------------


def df_profile(path: RidgePath) -> np.ndarray:
    return np.array([effective_df(f.fisher, lam) for f, lam in zip(path.fits, path.grid)])


def deviance_profile(std_data: Dataset, loo_probs) -> np.ndarray:
    return np.array([criterion_D(p, std_data.y) for p in loo_probs])


def profile_D(std_data, path, loo) -> CriterionProfile:
    probs, conv, clipped = loo
    scores = deviance_profile(std_data, probs)
    return CriterionProfile(
        "D", path.grid, scores, select_lambda(scores), MIN_SMALLEST,
        nonconverged=~conv.all(axis=1), clipped=clipped.any(axis=1),
    )


def profile_CE(std_data, path, loo, c=None) -> CriterionProfile:
    probs, conv, clipped = loo
    ok = conv.all(axis=1)
    scores = np.array([criterion_CE(p, std_data.y, c) if good else np.inf for p, good in zip(probs, ok)])
    return CriterionProfile(
        "CE", path.grid, scores, select_lambda(scores, MIN_LARGEST), MIN_LARGEST,
        nonconverged=~conv.all(axis=1), clipped=clipped.any(axis=1),
    )


def profile_GCV(std_data, path, df_e=None, loo=None, mode: str = "insample") -> CriterionProfile:
    """GCV over the grid; ``mode`` chooses in-sample or leave-one-out deviance."""
    df_e = df_profile(path) if df_e is None else df_e
    if mode == "insample":
        dev = -2.0 * path.loglik
    elif mode == "loocv":
        if loo is None:
            raise ValueError("loocv mode needs leave-one-out predictions")
        dev = deviance_profile(std_data, loo[0])
    else:
        raise ValueError(f"unknown GCV mode {mode!r}")
    n = std_data.n
    scores = np.array([
        criterion_GCV(n, d, e) if (c and e < n) else np.inf
        for d, e, c in zip(dev, df_e, path.converged)
    ])
    return CriterionProfile(
        "GCV", path.grid, scores, select_lambda(scores), MIN_SMALLEST,
        nonconverged=~path.converged,
    )


def profile_AIC(std_data, path, df_e=None) -> CriterionProfile:
    df_e = df_profile(path) if df_e is None else df_e
    scores = np.where(path.converged, -2.0 * path.loglik + 2.0 * df_e, np.inf)
    return CriterionProfile(
        "AIC", path.grid, scores, select_lambda(scores), MIN_SMALLEST,
        nonconverged=~path.converged,
    )


# -- repeated k-fold CV ---------------------------------------------------------------


@dataclass
class RCVResult:
    per_rep: np.ndarray
    deviance: np.ndarray
    stratified: bool
    nonconverged: np.ndarray

    def quantile(self, theta: float) -> float:
        return float(np.quantile(self.per_rep, theta, method="linear"))


def rcv_lambdas(
    std_data: Dataset,
    grid,
    rng: np.random.Generator,
    reps: int = RCV_REPS,
    n_folds: int = N_FOLDS,
    *,
    rescale_s: float = DEFAULT_RESCALE,
) -> RCVResult:
    """Per-repetition minimizers of the k-fold cross-validated deviance.

    Non-converged fold fits keep their last iterate, as for the
    leave-one-out deviance.
    """
    if std_data.n < n_folds:
        raise ValueError(f"need at least {n_folds} observations for {n_folds}-fold CV")
    grid = np.asarray(grid, dtype=float)
    assignments = [stratified_folds(std_data.y, rng, n_folds) for _ in range(reps)]
    dev, bad = cv_deviance_profiles(std_data, grid, assignments, rescale_s=rescale_s)
    per_rep = np.array([grid[select_lambda(d)] for d in dev])
    return RCVResult(per_rep, dev, all(a.stratified for a in assignments), bad)


def rcv(std_data: Dataset, grid, theta: float, rng: np.random.Generator, reps: int = RCV_REPS) -> float:
    """The ``theta`` quantile of per-repetition 10-fold CV minimizers."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    return rcv_lambdas(std_data, grid, rng, reps).quantile(theta)


# -- oracles ----------------------------------------------------------------------------


def oracle_oex(path: RidgePath, beta1_true: float, std: Standardizer, coef: int = 1) -> CriterionProfile:
    """Grid value minimizing the error of the destandardized coefficient ``coef``."""
    est = np.array([destandardize(b, std)[coef] for b in path.betas])
    scores = np.where(path.converged, np.abs(est - beta1_true), np.inf)
    return CriterionProfile("OEX", path.grid, scores, select_lambda(scores), MIN_SMALLEST,
                            nonconverged=~path.converged)


def oracle_op(path: RidgePath, std_data: Dataset, pi_true) -> CriterionProfile:
    """Grid value minimizing the in-sample squared error against true probabilities."""
    pi_true = np.asarray(pi_true, dtype=float)
    if pi_true.shape[0] != std_data.n:
        raise ValueError("pi_true must have one entry per observation")
    err = ((path.predictions(std_data.X) - pi_true) ** 2).sum(axis=1)
    scores = np.where(path.converged, err, np.inf)
    return CriterionProfile("OP", path.grid, scores, select_lambda(scores), MIN_SMALLEST,
                            nonconverged=~path.converged)
