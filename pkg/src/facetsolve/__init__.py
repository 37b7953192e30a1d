"""Solver and verification battery for energies mixing 1-homogeneous and p-th power diffusion.

The discrete model minimizes, over node values with Dirichlet data,

    beta * integral |grad u|  +  integral |grad u|^p / p  -  integral f u,

through smooth relaxations sqrt(eps^2 + |grad u|^2) and
(eps^2 + |grad u|^2)^(p/2) / p driven to the limit by warm-started
continuation in eps. Diagnostics re-compute every quantity the structural
theory of such energies is built from (truncation fields, explicit
constants, localized norms, levelset measures) and check each testable
inequality on solver output.
"""

from .grid import BallRegion, Grid, ScalarField, VectorField
from .integrand import ModelParams
from .report import Report

__all__ = [
    "BallRegion",
    "Grid",
    "ScalarField",
    "VectorField",
    "ModelParams",
    "Report",
]

__version__ = "0.1.0"
