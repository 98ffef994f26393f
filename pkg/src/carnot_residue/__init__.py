"""Numerical residues, traces and spectral zeta functions on model Carnot manifolds.

Layers, bottom up:

* :mod:`~carnot_residue.graded_lie`: graded nilpotent Lie algebras, dilations, BCH.
* :mod:`~carnot_residue.fibred_model`: fibred densities ``f(z, h)`` with the zoom action.
* :mod:`~carnot_residue.kernel_calculus`: kernels, cocycles, local traces and residues.
* :mod:`~carnot_residue.spectral_models`: eigenvalue streams for torus and Heisenberg models.
* :mod:`~carnot_residue.trace_ideals`: singular values, Dixmier approximants, log-coefficients.
* :mod:`~carnot_residue.zeta_residue`: spectral zeta functions and their leading residue.
* :mod:`~carnot_residue.wodzicki`: Wodzicki residue on the torus and the Connes comparison.
"""
from .fibred_model import FibredDensityModel, builtin_model, lie_derivative_Z, local_trace, zoom_pushforward
from .graded_lie import GradedLieAlgebra, abelian, bch_multiply, engel, heisenberg, homogeneous_dimension
from .kernel_calculus import (
    TraceProfile,
    cocycle,
    local_trace_direct,
    local_trace_extended,
    reconstruct_kernel,
    residue_from_cocycle,
    trace_residue_at_pole,
)
from .spectral_models import HeisenbergSpec, heisenberg_stream, torus_stream, weyl_fit
from .trace_ideals import dixmier_estimate, from_spectral, log_coefficient_fit, partial_sums
from .wodzicki import ClassicalSymbol, connes_check, res_w
from .zeta_residue import ZetaProfile, c_of, res_dh, residue_at, zeta

__version__ = "0.1.0"

__all__ = [
    "GradedLieAlgebra", "abelian", "heisenberg", "engel", "bch_multiply", "homogeneous_dimension",
    "FibredDensityModel", "builtin_model", "zoom_pushforward", "local_trace", "lie_derivative_Z",
    "TraceProfile", "reconstruct_kernel", "cocycle", "local_trace_direct", "local_trace_extended",
    "trace_residue_at_pole", "residue_from_cocycle",
    "torus_stream", "HeisenbergSpec", "heisenberg_stream", "weyl_fit",
    "from_spectral", "partial_sums", "dixmier_estimate", "log_coefficient_fit",
    "ZetaProfile", "zeta", "residue_at", "c_of", "res_dh",
    "ClassicalSymbol", "res_w", "connes_check",
]
