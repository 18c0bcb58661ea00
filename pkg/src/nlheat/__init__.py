"""Lattice discretization and numerical audits for nonlocal parabolic equations with exterior data."""

from .kernel import Kernel, make_custom_kernel, make_fractional_kernel, normalization_constant
from .lattice import Cylinder, Grid, build_grid, make_cylinder, make_time_grid
from .nonlocal_op import (FarRule, OperatorMatrix, SpaceTimeField, apply_Lk, assemble, bilinear_form,
                          hs_seminorm, x0_norm)
from .spectral import SpectralBasis, solve_eigenproblem
from .evolution import galerkin_solve, lift_and_solve, monotone_solve, weak_residual, energy_report
from .tail import parabolic_tail
from .audit import (AuditResult, OrderScenario, audit_boundedness, audit_caccioppoli,
                    audit_harnack_suite, audit_order_principles)
from .covering import CoveringHost, ParabolicPointSet, covering_dichotomy, dilate_set, parabolic_distance
from .iterlemmas import geometric_decay_check, interpolation_bound, verify_interpolation

__version__ = "0.1.0"
