"""Error-inhibiting block finite differences for the heat equation."""

from .filters import FilterSpec, apply_filter
from .grid import build_grid, build_grid_1d, build_grid_2d, build_grid_3d
from .harness import builtin_cases, convergence_study, run_case
from .operator import BoundaryData, FaceTraces, Field, SpatialOperator
from .timestepper import RK4, RK6, integrate, stable_dt

__version__ = "0.1.0"

__all__ = [
    "BoundaryData",
    "FaceTraces",
    "Field",
    "FilterSpec",
    "RK4",
    "RK6",
    "SpatialOperator",
    "apply_filter",
    "build_grid",
    "build_grid_1d",
    "build_grid_2d",
    "build_grid_3d",
    "builtin_cases",
    "convergence_study",
    "integrate",
    "run_case",
    "stable_dt",
]
