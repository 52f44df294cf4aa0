"""Numerical verification of boundary-decay estimates for elliptic operators.

The package builds masked lattice domains, assembles Dirichlet operators
on them, diagonalises them and compares the resulting quantities with
explicit inequalities.  The distance and point-in-polygon kernels come from
a compiled extension when it is available (``boundecay.BACKEND`` is
``"cython"``) and from numpy otherwise.
"""

from ._core import BACKEND
from .estimates import BoundReport, ExponentFit, c0, c1, fit_exponent
from .geometry import DomainSpec, GridDomain, build_domain, distance_to_boundary, epsilon_schedule
from .kernels import HeatReport, halfline_reference, heat_strip_mass, weyl_bracket
from .operator import (
    CoefficientField,
    EllipticOperator,
    assemble_1d_weighted,
    assemble_divergence_form,
    assemble_weighted_laplacian,
)
from .perturbation import shrink_and_solve, verify_thm11
from .spectral import EigenSystem, eigensolve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundReport",
    "CoefficientField",
    "DomainSpec",
    "EigenSystem",
    "EllipticOperator",
    "ExponentFit",
    "GridDomain",
    "HeatReport",
    "assemble_1d_weighted",
    "assemble_divergence_form",
    "assemble_weighted_laplacian",
    "build_domain",
    "c0",
    "c1",
    "distance_to_boundary",
    "eigensolve",
    "epsilon_schedule",
    "fit_exponent",
    "halfline_reference",
    "heat_strip_mass",
    "shrink_and_solve",
    "verify_thm11",
    "weyl_bracket",
]
