"""Numerical laboratory for the dissipative surface quasi-geostrophic equation with sub-critical dissipation."""

from .spectral import Grid, SpectralField, VelocityField, make_grid
from .timestepper import NormTrace, SimConfig, simulate
from .xnorms import xnorm

__all__ = ["Grid", "SpectralField", "VelocityField", "make_grid", "xnorm", "SimConfig", "NormTrace", "simulate"]
__version__ = "0.1.0"
