"""Numerical laboratory for the radial biharmonic NLS with a repulsive potential."""

from bnlsv.model import ModelParams, Potential, critical_exponent, admissible_power_range
from bnlsv.grid import Field, RadialGrid, make_grid

__all__ = [
    "Field",
    "ModelParams",
    "Potential",
    "RadialGrid",
    "admissible_power_range",
    "critical_exponent",
    "make_grid",
]

__version__ = "0.1.0"
