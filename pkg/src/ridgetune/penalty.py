"""Penalized logistic fits: Firth's correction, FLIC and ridge.

Ridge is available two ways. :func:`fit_ridge_augmented` appends weighted
pseudo-records and runs plain weighted ML; :func:`fit_ridge_direct` runs
Newton on the exact quadratic penalty. The second serves as a check on the
first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .exceptions import ConstantColumnError, DimensionError
from .glm import (
    GRAD_TOL,
    MAX_ITER,
    Dataset,
    FitResult,
    _bernoulli_loglik,
    _check_beta,
    _finish,
    clip_probabilities,
    expit,
    fit_ml,
    ml_objective,
    newton_maximize,
    score_and_fisher,
)

FIRTH_MAX_ITER = 50
DEFAULT_RESCALE = 10.0


@dataclass(frozen=True)
class Standardizer:
    """Column means and sample standard deviations (divisor N-1) of the covariates."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).ravel()
        sds = np.asarray(self.sds, dtype=float).ravel()
        if means.shape != sds.shape:
            raise DimensionError("means and sds must have equal length")
        if np.any(~(sds > 0)):
            raise ValueError("standard deviations must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    @classmethod
    def identity(cls, k: int) -> "Standardizer":
        return cls(np.zeros(k), np.ones(k))

    def transform(self, X) -> np.ndarray:
        """Standardize a design matrix whose column 0 is the intercept."""
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.means.shape[0] + 1:
            raise DimensionError("design matrix width does not match the standardizer")
        out = X.copy()
        out[:, 1:] = (X[:, 1:] - self.means) / self.sds
        return out

    def destandardize(self, beta_std) -> np.ndarray:
        return destandardize(beta_std, self)

    def standardize_beta(self, beta) -> np.ndarray:
        """Inverse of :meth:`destandardize`."""
        beta = np.asarray(beta, dtype=float)
        out = np.empty_like(beta)
        out[1:] = beta[1:] * self.sds
        out[0] = beta[0] + np.sum(beta[1:] * self.means)
        return out


def standardize(data: Dataset):
    """Center and scale every non-intercept column to mean 0, sd 1 (divisor N-1).

    Returns
    -------
    (Dataset, Standardizer)
    """
    Z = data.X[:, 1:]
    if data.n < 2 and Z.shape[1] > 0:
        raise ConstantColumnError("need at least two rows to standardize")
    means = Z.mean(axis=0)
    sds = Z.std(axis=0, ddof=1) if Z.shape[1] else np.zeros(0)
    bad = np.flatnonzero(~(sds > 1e-12 * np.maximum(1.0, np.abs(means))))
    if bad.size:
        raise ConstantColumnError(f"covariate column(s) {list(bad + 1)} have zero variance")
    std = Standardizer(means, sds)
    return Dataset(std.transform(data.X), data.y, data.w), std


def destandardize(beta_std, std: Standardizer) -> np.ndarray:
    """Map coefficients fitted on standardized covariates back to the original scale."""
    beta_std = np.asarray(beta_std, dtype=float).ravel()
    if beta_std.shape[0] != std.means.shape[0] + 1:
        raise DimensionError("coefficient vector does not match the standardizer")
    out = np.empty_like(beta_std)
    out[1:] = beta_std[1:] / std.sds
    out[0] = beta_std[0] - np.sum(beta_std[1:] * std.means / std.sds)
    return out


# -- Firth / FLIC -------------------------------------------------------------


def firth_objective(data: Dataset):
    """Penalized log-likelihood ``l + 0.5 log|I|`` with its modified score.

    The returned information is the Fisher matrix, used as the Newton
    metric (the usual choice for Firth-type fitting).
    """

    def objective(beta):
        p, _ = clip_probabilities(expit(data.X @ beta))
        v = data.w * p * (1.0 - p)
        fisher = (data.X * v[:, None]).T @ data.X
        fisher = 0.5 * (fisher + fisher.T)
        sign, logdet = np.linalg.slogdet(fisher)
        if sign <= 0:
            return -np.inf, np.zeros_like(beta), fisher
        ll = _bernoulli_loglik(data.y, p, data.w)
        inv = np.linalg.inv(fisher)
        h = v * np.einsum("ij,jk,ik->i", data.X, inv, data.X)
        grad = data.X.T @ (data.w * (data.y - p) + h * (0.5 - p))
        return ll + 0.5 * logdet, grad, fisher

    return objective


def fit_firth(
    data: Dataset,
    init=None,
    *,
    max_iter: int = FIRTH_MAX_ITER,
    tol: float = GRAD_TOL,
    strict: bool = False,
) -> FitResult:
    """Firth-corrected logistic regression (Jeffreys-prior penalty, intercept included)."""
    beta0 = np.zeros(data.n_coef) if init is None else _check_beta(data, init)
    run = newton_maximize(firth_objective(data), beta0, max_iter=max_iter, tol=tol)
    return _finish(data, run, None, strict=strict, label="fit_firth")


def flic(data: Dataset, firth_fit: FitResult, *, strict: bool = False) -> FitResult:
    """Re-estimate the intercept of a Firth fit so mean prediction equals the event rate.

    Slopes are kept exactly; the intercept is the ML estimate with the Firth
    linear predictor (without intercept) as offset.
    """
    if not firth_fit.converged:
        raise ValueError("flic requires a converged Firth fit")
    beta = _check_beta(data, firth_fit.beta).copy()
    offset = data.X[:, 1:] @ beta[1:]
    intercept_only = Dataset(data.X[:, :1], data.y, data.w, data.pseudo)
    fit0 = fit_ml(intercept_only, offset=offset, init=beta[:1], strict=strict)
    beta[0] = fit0.beta[0]
    run = dict(
        beta=beta,
        value=np.nan,
        converged=fit0.converged,
        iterations=fit0.iterations,
        grad_norm=fit0.grad_norm,
        flags=set(fit0.flags),
    )
    result = _finish(data, run, None, strict=False, label="flic")
    return FitResult(
        beta=result.beta,
        loglik=result.loglik,
        fisher=result.fisher,
        converged=result.converged,
        iterations=result.iterations,
        grad_norm=result.grad_norm,
        objective=result.loglik,
        flags=result.flags,
    )


# -- ridge ------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltySpec:
    """Ridge penalty strength on standardized coefficients.

    ``rescale_s`` is the pseudo-record rescaling factor used by data
    augmentation. The intercept is never penalized.
    """

    lam: float
    rescale_s: float = DEFAULT_RESCALE
    penalized_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and nonnegative, got {self.lam}")
        if not self.rescale_s > 0:
            raise ValueError("rescale_s must be positive")
        if self.penalized_mask is not None:
            mask = np.asarray(self.penalized_mask, dtype=bool).ravel()
            if mask[0]:
                raise ValueError("the intercept cannot be penalized")
            object.__setattr__(self, "penalized_mask", mask)

    def mask(self, n_coef: int) -> np.ndarray:
        if self.penalized_mask is None:
            m = np.ones(n_coef, dtype=bool)
            m[0] = False
            return m
        if self.penalized_mask.shape[0] != n_coef:
            raise DimensionError("penalized_mask length does not match the design")
        return self.penalized_mask


def pseudo_records(n_coef: int, spec: PenaltySpec):
    """Rows, outcomes and weights of the augmentation records for ``spec``.

    Each penalized coefficient k gets two rows with entry k equal to 1/s and
    zeros elsewhere (intercept included), one with y=1 and one with y=0, each
    weighted ``2 s^2 lambda``.
    """
    idx = np.flatnonzero(spec.mask(n_coef))
    s = spec.rescale_s
    rows = np.zeros((2 * idx.size, n_coef))
    rows[2 * np.arange(idx.size), idx] = 1.0 / s
    rows[2 * np.arange(idx.size) + 1, idx] = 1.0 / s
    y = np.tile([1.0, 0.0], idx.size)
    w = np.full(2 * idx.size, 2.0 * s * s * spec.lam)
    return rows, y, w


def augment(std_data: Dataset, spec: PenaltySpec) -> Dataset:
    rows, y, w = pseudo_records(std_data.n_coef, spec)
    return Dataset(
        np.vstack([std_data.X, rows]),
        np.concatenate([std_data.y, y]),
        np.concatenate([std_data.w, w]),
        np.concatenate([std_data.pseudo, np.ones(rows.shape[0], dtype=bool)]),
    )


def fit_ridge_augmented(
    std_data: Dataset,
    spec: PenaltySpec,
    init=None,
    *,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
    strict: bool = False,
) -> FitResult:
    """Ridge fit by weighted ML on the data augmented with pseudo-records.

    The reported ``loglik`` and ``fisher`` refer to the original records only.
    """
    if not spec.lam > 0:
        raise ValueError("data augmentation needs lambda > 0")
    aug = augment(std_data, spec)
    fit = fit_ml(aug, init=init, max_iter=max_iter, tol=tol, strict=strict)
    return _strip(std_data, fit)


def _strip(data: Dataset, fit: FitResult) -> FitResult:
    ll = log_lik_at(data, fit.beta)
    _, fisher = score_and_fisher(data, fit.beta)
    return FitResult(
        beta=fit.beta,
        loglik=ll,
        fisher=fisher,
        converged=fit.converged,
        iterations=fit.iterations,
        grad_norm=fit.grad_norm,
        objective=fit.objective,
        flags=fit.flags,
    )


def log_lik_at(data: Dataset, beta) -> float:
    p, _ = clip_probabilities(expit(data.X @ beta))
    return _bernoulli_loglik(data.y, p, data.w)


def ridge_objective(std_data: Dataset, spec: PenaltySpec):
    """Exact penalized log-likelihood ``l - (lambda/2) sum_k beta_k^2``."""
    base = ml_objective(std_data)
    P = np.diag(spec.mask(std_data.n_coef).astype(float))
    lam = spec.lam

    def objective(beta):
        ll, grad, info = base(beta)
        pb = P @ beta
        return ll - 0.5 * lam * float(beta @ pb), grad - lam * pb, info + lam * P

    return objective


def fit_ridge_direct(
    std_data: Dataset,
    spec: PenaltySpec,
    init=None,
    *,
    max_iter: int = MAX_ITER,
    tol: float = GRAD_TOL,
    strict: bool = False,
) -> FitResult:
    """Ridge fit by Newton's method on the exact quadratic penalty."""
    beta0 = np.zeros(std_data.n_coef) if init is None else _check_beta(std_data, init)
    run = newton_maximize(ridge_objective(std_data, spec), beta0, max_iter=max_iter, tol=tol)
    return _finish(std_data, run, None, strict=strict, label="fit_ridge_direct")


# -- prior intervals ----------------------------------------------------------


@dataclass(frozen=True)
class PriorSpec:
    """Symmetric prior interval ``(1/or_upper, or_upper)`` for a standardized odds ratio."""

    or_upper: float
    coverage: float = 0.95

    def __post_init__(self):
        if not self.or_upper > 1:
            raise ValueError(f"or_upper must exceed 1, got {self.or_upper}")
        if not 0 < self.coverage < 1:
            raise ValueError("coverage must lie in (0, 1)")

    @property
    def interval(self):
        return 1.0 / self.or_upper, self.or_upper


def prior_to_lambda(prior) -> float:
    """Ridge strength implied by a zero-centred normal prior on the log odds ratio.

    The prior variance is ``(log(or_upper) / z)^2`` with ``z`` the normal
    quantile at ``(1 + coverage) / 2``; lambda is its reciprocal.
    """
    if not isinstance(prior, PriorSpec):
        prior = PriorSpec(float(prior))
    z = norm.ppf(0.5 * (1.0 + prior.coverage))
    v_prior = (np.log(prior.or_upper) / z) ** 2
    return float(1.0 / v_prior)


INFORMATIVE_PRIOR = PriorSpec(4.0)
WEAKLY_INFORMATIVE_PRIOR = PriorSpec(16.0)
# Rounded anchors used for the IP / WP methods.
IP_LAMBDA = 2.0
WP_LAMBDA = 0.5
