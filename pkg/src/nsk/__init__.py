"""Pseudo-spectral toolkit for the compressible Navier-Stokes-Korteweg system."""
from .spectral_core import Grid, SpectralField, make_grid, forward, inverse
from .linear_analysis import FluidParams, ParameterError
from .pressure import PolytropicLaw, VanDerWaalsLaw
from .nsk_solver import FluidState, NSKSolver

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "SpectralField",
    "make_grid",
    "forward",
    "inverse",
    "FluidParams",
    "ParameterError",
    "PolytropicLaw",
    "VanDerWaalsLaw",
    "FluidState",
    "NSKSolver",
]
