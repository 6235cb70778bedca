"""Numerical laboratory for the Schrödinger-Newton equation and its measurement paradox."""

__version__ = "0.1.0"

from .dynamics import HamiltonianSpec, MeanUpdate, StepControl
from .hilbert import BranchEnsemble, Grid, GridState, Mode, make_gaussian, trace_distance
from .optomeasure import LightSpec

__all__ = [
    "__version__",
    "Grid",
    "GridState",
    "BranchEnsemble",
    "Mode",
    "make_gaussian",
    "trace_distance",
    "HamiltonianSpec",
    "StepControl",
    "MeanUpdate",
    "LightSpec",
]
