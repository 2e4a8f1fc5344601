"""Binary logistic model primitives and a damped Newton driver.

All fitters in the package (ML, Firth, ridge) share :func:`newton_maximize`,
so every fit reports convergence the same way: the maximum absolute gradient
on the free coordinates must fall below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit as _expit

from .exceptions import DimensionError, NonConvergenceError, SingularInformationError

PROB_CLIP = 1e-10
GRAD_TOL = 1e-8
MAX_ITER = 25
MAX_HALVINGS = 5
RCOND_MIN = 1e-12
# relative slack when comparing objective values, so steps near the optimum
# are not rejected over rounding noise
VALUE_RTOL = 1e-12
# A small score alone is not convergence: along a separating direction the
# score decays as fast as the coefficients grow, while the Newton step stays
# near one. Convergence also needs the next Newton step to be negligible.
STEP_TOL = 1e-6

SEPARATION_SUSPECTED = "separation_suspected"
STEP_HALVING_USED = "step_halving_used"
PROB_CLIPPED = "prob_clipped"
SINGULAR_INFORMATION = "singular_information"
STALLED = "stalled"


def expit(u):
    """Logistic function ``1 / (1 + exp(-u))``, overflow safe for large ``|u|``."""
    return _expit(u)


@dataclass(frozen=True)
class Dataset:
    """Design matrix with intercept column, binary outcome and weights.

    Parameters
    ----------
    X : ndarray, shape (N, K+1)
        Column 0 is the intercept (all ones, except for rows flagged in
        ``pseudo`` where it is 0).
    y : ndarray, shape (N,)
        Outcomes, exactly 0 or 1.
    w : ndarray, shape (N,), optional
        Nonnegative observation weights; all ones by default.
    pseudo : ndarray of bool, shape (N,), optional
        Marks ridge pseudo-records appended by data augmentation.
    """

    X: np.ndarray
    y: np.ndarray
    w: Optional[np.ndarray] = None
    pseudo: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        n = X.shape[0]
        w = np.ones(n) if self.w is None else np.asarray(self.w, dtype=float).ravel()
        pseudo = (
            np.zeros(n, dtype=bool)
            if self.pseudo is None
            else np.asarray(self.pseudo, dtype=bool).ravel()
        )
        if n < 1 or X.shape[1] < 1:
            raise DimensionError("design matrix needs at least one row and one column")
        if y.shape[0] != n or w.shape[0] != n or pseudo.shape[0] != n:
            raise DimensionError(
                f"X has {n} rows but y, w, pseudo have {y.shape[0]}, {w.shape[0]}, {pseudo.shape[0]}"
            )
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("outcome must contain only 0 and 1")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(X)):
            raise ValueError("design matrix contains non-finite values")
        expected = np.where(pseudo, 0.0, 1.0)
        if not np.array_equal(X[:, 0], expected):
            raise ValueError("column 0 must be the intercept (1, or 0 on pseudo-records)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "pseudo", pseudo)

    @classmethod
    def from_covariates(cls, covariates, y, w=None) -> "Dataset":
        """Build a dataset from an (N, K) covariate array, prepending the intercept."""
        Z = np.asarray(covariates, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        return cls(np.column_stack([np.ones(Z.shape[0]), Z]), y, w)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    def with_weights(self, w) -> "Dataset":
        return Dataset(self.X, self.y, w, self.pseudo)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a (penalized) logistic fit.

    ``loglik`` is always the unpenalized log-likelihood at ``beta``; the
    maximized objective is kept separately in ``objective``.
    """

    beta: np.ndarray
    loglik: float
    fisher: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    objective: float = np.nan
    flags: frozenset = field(default_factory=frozenset)

    def linear_predictor(self, X, offset=None) -> np.ndarray:
        eta = np.asarray(X, dtype=float) @ self.beta
        return eta if offset is None else eta + offset

    def predict_proba(self, X, offset=None) -> np.ndarray:
        return expit(self.linear_predictor(X, offset))


def _check_beta(data: Dataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != data.n_coef:
        raise DimensionError(f"beta has length {beta.shape[0]}, expected {data.n_coef}")
    return beta


def _check_offset(data: Dataset, offset) -> np.ndarray:
    if offset is None:
        return np.zeros(data.n)
    offset = np.asarray(offset, dtype=float).ravel()
    if offset.shape[0] != data.n:
        raise DimensionError(f"offset has length {offset.shape[0]}, expected {data.n}")
    return offset


def clip_probabilities(p):
    """Clip probabilities to ``[PROB_CLIP, 1 - PROB_CLIP]``; returns (clipped, any_clipped)."""
    p = np.asarray(p, dtype=float)
    clipped = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return clipped, bool(np.any(clipped != p))


def _probabilities(data: Dataset, beta, offset):
    return clip_probabilities(expit(data.X @ beta + offset))


def _bernoulli_loglik(y, p, w) -> float:
    return float(np.sum(w * (y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def log_likelihood(data: Dataset, beta, offset=None) -> float:
    """Weighted Bernoulli log-likelihood with probabilities clipped at 1e-10."""
    beta = _check_beta(data, beta)
    offset = _check_offset(data, offset)
    p, _ = _probabilities(data, beta, offset)
    return _bernoulli_loglik(data.y, p, data.w)


def score_and_fisher(data: Dataset, beta, offset=None):
    """Gradient ``X' W (y - pi)`` and Fisher information ``X' diag(w pi (1-pi)) X``."""
    beta = _check_beta(data, beta)
    offset = _check_offset(data, offset)
    p, _ = _probabilities(data, beta, offset)
    grad = data.X.T @ (data.w * (data.y - p))
    fisher = (data.X * (data.w * p * (1.0 - p))[:, None]).T @ data.X
    return grad, 0.5 * (fisher + fisher.T)


# An objective returns (value, gradient, information), where information is
# the negative Hessian or a positive-definite approximation of it.
Objective = Callable[[np.ndarray], tuple]


def _rcond(mat) -> float:
    if mat.size == 0:
        return 1.0
    ev = np.linalg.eigvalsh(mat)
    top = ev[-1]
    if not np.isfinite(top) or top <= 0:
        return 0.0
    return float(max(ev[0], 0.0) / top)


def _no_worse(cand, current):
    return np.isfinite(cand) & (cand >= current - VALUE_RTOL * (1.0 + np.abs(current)))


def newton_maximize(
    objective: Objective,
    beta0,
    free=None,
    *,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
    max_halvings: int = MAX_HALVINGS,
):
    """Maximize ``objective`` by Newton steps with step-halving.

    Returns a dict with keys ``beta, value, grad, info, converged, iterations,
    grad_norm, flags``. Only coordinates in ``free`` move.
    """
    beta = np.array(beta0, dtype=float)
    p = beta.shape[0]
    free = np.arange(p) if free is None else np.asarray(free, dtype=int)
    flags = set()
    value, grad, info = objective(beta)
    iterations = 0
    converged = False
    solvable = True
    while True:
        gnorm = float(np.max(np.abs(grad[free]))) if free.size else 0.0
        small = gnorm <= tol
        block = info[np.ix_(free, free)]
        step = None
        if free.size and _rcond(block) >= RCOND_MIN:
            try:
                step = np.linalg.solve(block, grad[free])
            except np.linalg.LinAlgError:
                step = None
        solvable = step is not None
        if small and (step is None or np.max(np.abs(step)) <= STEP_TOL):
            converged = True
            break
        if iterations >= max_iter:
            break
        if step is None:
            flags.add(SINGULAR_INFORMATION)
            break
        iterations += 1
        scale = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            cand = beta.copy()
            cand[free] += scale * step
            cval, cgrad, cinfo = objective(cand)
            if _no_worse(cval, value):
                accepted = True
                break
            scale *= 0.5
            flags.add(STEP_HALVING_USED)
        if not accepted:
            flags.add(STALLED)
            break
        beta, value, grad, info = cand, cval, cgrad, cinfo
    gnorm = float(np.max(np.abs(grad[free]))) if free.size else 0.0
    return dict(
        beta=beta,
        value=value,
        grad=grad,
        info=info,
        converged=converged,
        iterations=iterations,
        grad_norm=gnorm,
        flags=flags,
        solvable=solvable,
    )


def _finish(data, run, offset, extra_flags=(), strict=False, label="fit"):
    beta = run["beta"]
    off = _check_offset(data, offset)
    p, clipped = _probabilities(data, beta, off)
    _, fisher = score_and_fisher(data, beta, off)
    flags = set(run["flags"]) | set(extra_flags)
    converged = run["converged"]
    if clipped:
        flags.add(PROB_CLIPPED)
        # Clipped records still leave a Newton step near one along a separating
        # direction, so the step test already rejects divergence. Only a score
        # that vanished with no usable step is left to distrust here.
        if not run.get("solvable", True):
            converged = False
    if not converged and (np.max(np.abs(beta)) > 10.0 or clipped):
        flags.add(SEPARATION_SUSPECTED)
    result = FitResult(
        beta=beta,
        loglik=_bernoulli_loglik(data.y, p, data.w),
        fisher=fisher,
        converged=converged,
        iterations=run["iterations"],
        grad_norm=run["grad_norm"],
        objective=float(run["value"]),
        flags=frozenset(flags),
    )
    if strict and not result.converged:
        if SINGULAR_INFORMATION in flags and run["iterations"] == 0:
            raise SingularInformationError(f"{label}: information matrix is singular", result)
        raise NonConvergenceError(
            f"{label}: no convergence after {run['iterations']} iterations "
            f"(gradient max-norm {run['grad_norm']:.3g}, flags {sorted(flags)})",
            result,
        )
    return result


def ml_objective(data: Dataset, offset=None) -> Objective:
    off = _check_offset(data, offset)

    def objective(beta):
        p, _ = _probabilities(data, beta, off)
        ll = _bernoulli_loglik(data.y, p, data.w)
        grad = data.X.T @ (data.w * (data.y - p))
        info = (data.X * (data.w * p * (1.0 - p))[:, None]).T @ data.X
        return ll, grad, info

    return objective


def fit_ml(
    data: Dataset,
    offset=None,
    frozen: Optional[Sequence[int]] = None,
    init=None,
    *,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
    strict: bool = False,
) -> FitResult:
    """Weighted maximum-likelihood logistic fit.

    Parameters
    ----------
    data : Dataset
    offset : array_like, optional
        Added to the linear predictor.
    frozen : sequence of int, optional
        Coefficient indices held at their ``init`` values.
    init : array_like, optional
        Starting coefficients (zeros by default).
    strict : bool
        Raise :class:`NonConvergenceError` / :class:`SingularInformationError`
        instead of returning an unconverged result.

    Notes
    -----
    Under separation the likelihood has no finite maximizer; the fit then
    stops at the iteration cap with ``converged=False`` and the
    ``separation_suspected`` flag set.
    """
    beta0 = np.zeros(data.n_coef) if init is None else _check_beta(data, init)
    frozen_set = set() if frozen is None else {int(i) for i in frozen}
    if any(i < 0 or i >= data.n_coef for i in frozen_set):
        raise DimensionError(f"frozen indices {sorted(frozen_set)} out of range")
    free = np.array([i for i in range(data.n_coef) if i not in frozen_set], dtype=int)
    run = newton_maximize(ml_objective(data, offset), beta0, free, max_iter=max_iter, tol=tol)
    return _finish(data, run, offset, strict=strict, label="fit_ml")


def _batched_solve(info, grad):
    """Solve ``info[f] @ step[f] = grad[f]`` for every f; singular systems are masked."""
    try:
        return np.linalg.solve(info, grad[:, :, None])[:, :, 0], np.ones(len(grad), dtype=bool)
    except np.linalg.LinAlgError:
        step = np.zeros_like(grad)
        ok = np.ones(len(grad), dtype=bool)
        for f in range(len(grad)):
            try:
                step[f] = np.linalg.solve(info[f], grad[f])
            except np.linalg.LinAlgError:
                ok[f] = False
        return step, ok


def fit_ml_batch(X, y, W, init, *, max_iter: int = MAX_ITER, tol: float = GRAD_TOL,
                 max_halvings: int = MAX_HALVINGS):
    """Fit many weighted ML problems that share rows but differ in weights.

    ``W`` has shape (F, M): one weight vector per fit over the M rows of ``X``.
    Each fit runs the same damped Newton iteration as :func:`newton_maximize`.
    Returns ``(beta, converged, iterations, flagged_halving)`` with ``beta`` of
    shape (F, p).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    F, M = W.shape
    p = X.shape[1]
    beta = np.array(np.broadcast_to(init, (F, p)), dtype=float)
    outer = (X[:, :, None] * X[:, None, :]).reshape(M, p * p)

    def evaluate(b, rows):
        prob, _ = clip_probabilities(expit(b @ X.T))
        Wr = W[rows]
        ll = np.sum(Wr * (y * np.log(prob) + (1.0 - y) * np.log1p(-prob)), axis=1)
        grad = (Wr * (y - prob)) @ X
        info = ((Wr * prob * (1.0 - prob)) @ outer).reshape(-1, p, p)
        return ll, grad, info

    active = np.arange(F)
    value, grad, info = evaluate(beta, active)
    converged = np.zeros(F, dtype=bool)
    iterations = np.zeros(F, dtype=int)
    halved = np.zeros(F, dtype=bool)
    unsolved = np.zeros(F, dtype=bool)
    for _ in range(max_iter + 1):
        gnorm = np.max(np.abs(grad), axis=1)
        step, solvable = _batched_solve(info, grad)
        done = (gnorm <= tol) & (~solvable | (np.max(np.abs(step), axis=1) <= STEP_TOL))
        converged[active[done]] = True
        unsolved[active[done & ~solvable]] = True
        keep = ~done & (iterations[active] < max_iter)
        active, value, grad, info = active[keep], value[keep], grad[keep], info[keep]
        step, solvable = step[keep], solvable[keep]
        if active.size == 0:
            break
        if not solvable.all():
            active, value, grad, info, step = (
                active[solvable], value[solvable], grad[solvable], info[solvable], step[solvable]
            )
            if active.size == 0:
                break
        iterations[active] += 1
        scale = np.ones(active.size)
        cand = beta[active] + step
        cval, cgrad, cinfo = evaluate(cand, active)
        for _ in range(max_halvings):
            bad = ~_no_worse(cval, value)
            if not bad.any():
                break
            halved[active[bad]] = True
            scale[bad] *= 0.5
            cand[bad] = beta[active[bad]] + scale[bad, None] * step[bad]
            v2, g2, i2 = evaluate(cand[bad], active[bad])
            cval[bad], cgrad[bad], cinfo[bad] = v2, g2, i2
        ok = _no_worse(cval, value)
        beta[active[ok]] = cand[ok]
        value = np.where(ok, cval, value)
        grad = np.where(ok[:, None], cgrad, grad)
        info = np.where(ok[:, None, None], cinfo, info)
        # stalled fits stop iterating
        stalled = ~ok
        active, value, grad, info = (
            active[~stalled], value[~stalled], grad[~stalled], info[~stalled]
        )
        if active.size == 0:
            break
    raw = expit(beta @ X.T)
    clipped = np.any((W > 0) & ((raw < PROB_CLIP) | (raw > 1.0 - PROB_CLIP)), axis=1)
    converged &= ~(clipped & unsolved)
    return beta, converged, iterations, halved
