"""Penalized logistic regression with ridge tuning diagnostics and a simulation harness."""

from .exceptions import (
    CalibrationCacheError,
    ConstantColumnError,
    DimensionError,
    NonConvergenceError,
    RidgeTuneError,
    SelectionError,
    SeparationCheckError,
    SingularInformationError,
)
from .glm import Dataset, FitResult, fit_ml, log_likelihood, score_and_fisher
from .penalty import (
    PenaltySpec,
    PriorSpec,
    destandardize,
    fit_firth,
    fit_ridge_augmented,
    fit_ridge_direct,
    flic,
    prior_to_lambda,
    standardize,
)
from .separation import detect_separation
from .tuning import default_grid, loocv_predictions, ridge_path, select_lambda

__version__ = "0.1.0"
