"""Periodic linear inverse models for cyclostationary stochastic systems."""
from ._kernel import BACKEND
from .errors import CSLIMError
from .models import PeriodicModel, classical_lim, cs_lim, l_cs_lim
from .simulate import RandomStream, TimeSeries, random_stable_system, sample_path, sinusoidal_system

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CSLIMError",
    "PeriodicModel",
    "RandomStream",
    "TimeSeries",
    "classical_lim",
    "cs_lim",
    "l_cs_lim",
    "random_stable_system",
    "sample_path",
    "sinusoidal_system",
    "__version__",
]
