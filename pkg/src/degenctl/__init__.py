"""Null controllability toolkit for 1-D degenerate heat equations with
nonlocal integral terms: weighted variational control computation,
fixed-point drivers for the nonlocal coupling, and numerical verification
of the weighted inequalities behind the construction."""

from .model import (DIV_SD, DIV_WD, NONDIV, ControlRegion,
                    DegenerateCoefficient, KernelSpec, SpatialGrid, TimeGrid,
                    apply_nonlocal, kernel_weighted_sup, validate_coefficient,
                    weighted_inner, weighted_norm)
from .weights import (EPSILON_MAX, WeightParams, WeightSet, assemble_weights,
                      build_sigma, choose_parameters, compute_p,
                      verify_parameter_inequalities)
from .pde import (GalerkinBasis, assemble_operator, galerkin_eigenbasis,
                  solve_adjoint, solve_forward, solve_galerkin)
from .hum import (ControlOptions, ControlResult, apply_kappa, assemble_ell,
                  evaluate_J, extract_control, null_control_nonhom,
                  solve_dual)
from .nonlocal_control import (FixedPointTrace, check_kernel_hypotheses,
                               fixed_point_control, supported_kernel_shortcut,
                               two_phase_control)
from .verify import (check_caccioppoli, check_carleman, check_energy_estimates,
                     check_hardy, check_observability,
                     check_splitting_identity)

__version__ = "0.1.0"

__all__ = [
    "NONDIV", "DIV_WD", "DIV_SD", "SpatialGrid", "TimeGrid",
    "DegenerateCoefficient", "ControlRegion", "KernelSpec",
    "validate_coefficient", "weighted_inner", "weighted_norm",
    "apply_nonlocal", "kernel_weighted_sup",
    "WeightParams", "WeightSet", "EPSILON_MAX", "build_sigma", "compute_p",
    "choose_parameters", "assemble_weights", "verify_parameter_inequalities",
    "assemble_operator", "solve_forward", "solve_adjoint", "GalerkinBasis",
    "galerkin_eigenbasis", "solve_galerkin",
    "ControlOptions", "ControlResult", "apply_kappa", "assemble_ell",
    "solve_dual", "extract_control", "null_control_nonhom", "evaluate_J",
    "FixedPointTrace", "check_kernel_hypotheses", "fixed_point_control",
    "two_phase_control", "supported_kernel_shortcut",
    "check_hardy", "check_splitting_identity", "check_carleman",
    "check_caccioppoli", "check_observability", "check_energy_estimates",
]
