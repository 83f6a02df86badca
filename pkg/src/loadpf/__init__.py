"""Robust particle filtering and forecasting of half-hourly electricity load."""

from .degeneracy import DegeneracyReport, Health, Thresholds
from .ensemble import WeightedEnsemble
from .filter import FilterConfig, FilterState, ForecastRecord, StepAction
from .loadmodel import LoadModel

__all__ = [
    "DegeneracyReport", "Health", "Thresholds", "WeightedEnsemble", "FilterConfig",
    "FilterState", "ForecastRecord", "StepAction", "LoadModel",
]
__version__ = "0.1.0"
