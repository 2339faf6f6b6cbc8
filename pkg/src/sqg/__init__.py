"""Pseudo-spectral solver and dyadic diagnostics for dissipative SQG on the 2-torus."""

from .spectral import GridSpec, ScalarField, VectorField
from .solver import SolverConfig, InitialConditionSpec, run, step

__all__ = ["GridSpec", "ScalarField", "VectorField", "SolverConfig", "InitialConditionSpec", "run", "step"]
__version__ = "0.1.0"
