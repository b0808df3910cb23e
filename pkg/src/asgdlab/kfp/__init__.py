"""Hermite-Galerkin calculus and solver for the phase-space fluctuation equation."""
from .basis import GaussianMeasure, HermiteField, quadrature_inner, weighted_inner
from .operators import (
    apply_L,
    apply_R,
    apply_T,
    check_poincare,
    lyapunov_H,
    poincare_linear_closed_form,
    verify_identities,
    verify_perturbation_bounds,
)
from .solver import (
    GeneratorMatrix,
    KfpSeries,
    SteadyState,
    analytic_spectrum,
    assemble_generator,
    compute_steady_state,
    evolve,
    random_field,
)

__all__ = [
    "GaussianMeasure", "HermiteField", "quadrature_inner", "weighted_inner",
    "apply_L", "apply_R", "apply_T", "check_poincare", "lyapunov_H",
    "poincare_linear_closed_form", "verify_identities", "verify_perturbation_bounds",
    "GeneratorMatrix", "KfpSeries", "SteadyState", "analytic_spectrum",
    "assemble_generator", "compute_steady_state", "evolve", "random_field",
]
