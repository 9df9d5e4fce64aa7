"""Simulator for fast collective-ground-state entanglement in fiber-coupled cavities.

Builds the chain Hamiltonians, the Zeno-subspace effective models, the
adiabatic (fractional STIRAP) and shortcut (counter-diabatic) pulse
schedules, evolves the closed and open system, and sweeps parameters to
produce plot-ready data.
"""

__version__ = "0.1.0"

from .errors import (
    CavityGhzError,
    ConfigurationError,
    DimensionError,
    IntegrationError,
    MethodMismatchError,
    ScheduleError,
    TruncationError,
    UndefinedAngleError,
    ValidationError,
)
from .model import SystemParams

__all__ = [
    "CavityGhzError",
    "ConfigurationError",
    "DimensionError",
    "IntegrationError",
    "MethodMismatchError",
    "ScheduleError",
    "SystemParams",
    "TruncationError",
    "UndefinedAngleError",
    "ValidationError",
    "__version__",
]
