"""Maximum-likelihood latent class analysis, single-level and multilevel, with covariates."""

from .core import MeasurementParams, ModelSpec, Posteriors, StructuralParams, compute_posteriors, multilevel_loglik
from .data import Dataset, load_dataset
from .em import EmControl
from .estimators import FitResult, fit, fit_one_step, fit_two_stage, fit_two_step
from .selection import select_sequential, select_simultaneous
from .simulate import TrueModel, baseline_truth, generate

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EmControl",
    "FitResult",
    "MeasurementParams",
    "ModelSpec",
    "Posteriors",
    "StructuralParams",
    "TrueModel",
    "baseline_truth",
    "compute_posteriors",
    "fit",
    "fit_one_step",
    "fit_two_stage",
    "fit_two_step",
    "generate",
    "load_dataset",
    "multilevel_loglik",
    "select_sequential",
    "select_simultaneous",
]
