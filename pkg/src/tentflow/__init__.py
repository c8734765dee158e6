"""Tent-space norms and a Picard solver for inhomogeneous Navier-Stokes on the torus."""

from .grid import (
    PeriodicGrid,
    ScalarField,
    SpaceTimeField,
    TimeGrid,
    VectorField,
    make_log_time_grid,
    resample,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PeriodicGrid",
    "ScalarField",
    "SpaceTimeField",
    "TimeGrid",
    "VectorField",
    "make_log_time_grid",
    "resample",
]
