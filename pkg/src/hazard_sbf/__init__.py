"""Smooth backfitting estimators for additive hazards."""

from .data import (DatasetError, DimensionGrid, EvaluationGrid, SurvivalDataset, SurvivalRecord,
                   validate_dataset)
from .estimator import SmoothBackfittingHazard
from .fitting import fit, fit_estimators
from .model import AdditiveFit, Estimator, FitConfig, Norming, evaluate_fit
from .simulation import SimConfig, TrueHazard, simulate_dataset

__all__ = [
    "AdditiveFit", "DatasetError", "DimensionGrid", "Estimator", "EvaluationGrid", "FitConfig",
    "Norming", "SimConfig", "SmoothBackfittingHazard", "SurvivalDataset", "SurvivalRecord",
    "TrueHazard", "evaluate_fit", "fit", "fit_estimators", "simulate_dataset", "validate_dataset",
]
__version__ = "0.1.0"
