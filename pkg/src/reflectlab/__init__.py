"""Numerical checks of reflection principles for harmonic maps between
Riemannian and Hermitian symmetric spaces."""

from .chains import RecursiveChain, build_chain, check_chain_realforms, check_totally_geodesic
from .geometry import ModelSpace, make_space
from .harness import (
    ReflectionExperiment,
    meromorphic_reflection_check,
    minimal_surface_reflection_check,
    schwarz_extend,
    unique_continuation_experiment,
    verify_harmonic_function_reflection,
    verify_recursive_reflection,
    verify_reflection_identity,
)
from .involutions import Involution, make_sigma_q, make_tau_q, verify_involution
from .registry import lookup_real_forms
from .report import VerificationReport
from .solver import (
    DiscreteMap,
    GridDomain,
    SolveOptions,
    energy,
    extract_cauchy_data,
    laplace_beltrami_solve,
    make_grid,
    solve_dirichlet,
    tension,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteMap",
    "GridDomain",
    "Involution",
    "ModelSpace",
    "RecursiveChain",
    "ReflectionExperiment",
    "SolveOptions",
    "VerificationReport",
    "build_chain",
    "check_chain_realforms",
    "check_totally_geodesic",
    "energy",
    "extract_cauchy_data",
    "laplace_beltrami_solve",
    "lookup_real_forms",
    "make_grid",
    "make_sigma_q",
    "make_space",
    "make_tau_q",
    "meromorphic_reflection_check",
    "minimal_surface_reflection_check",
    "schwarz_extend",
    "solve_dirichlet",
    "tension",
    "unique_continuation_experiment",
    "verify_harmonic_function_reflection",
    "verify_involution",
    "verify_recursive_reflection",
    "verify_reflection_identity",
]
