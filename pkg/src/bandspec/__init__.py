"""Spectral computations for band operators with matrix entries.

Polynomial solution families of the forward and dual difference
equations, the resolvent kernel built from them and a Weyl matrix,
finite-section Weyl estimates and a decay-based classification of
spectral parameters.
"""
from ._backend import BACKEND
from .analysis import (
    DecayFit,
    GrowthReport,
    classify,
    decay_fit,
    decaying_identity_residual,
    f_invariant,
    f_spread,
    growth_report,
    lemma2_residual,
)
from .bandop import BandOperator, FiniteSection, ValidationReport, finite_section, section_inverse, validate
from .errors import (
    BandspecError,
    DegenerateWindow,
    NoConvergence,
    OverlapMismatch,
    ParseError,
    SingularBlock,
    SingularSection,
    ValidationError,
)
from .kernel import KernelWindow, WeylMatrix, kernel_entry, kernel_window, resolvent_residual
from .recurrence import SolutionBasis, extend, init_basis, recurrence_residual, step_dual, step_forward
from .weyl import weyl_converged, weyl_finite_section, weyl_gap

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BandOperator",
    "BandspecError",
    "DecayFit",
    "DegenerateWindow",
    "FiniteSection",
    "GrowthReport",
    "KernelWindow",
    "NoConvergence",
    "OverlapMismatch",
    "ParseError",
    "SingularBlock",
    "SingularSection",
    "SolutionBasis",
    "ValidationError",
    "ValidationReport",
    "WeylMatrix",
    "classify",
    "decay_fit",
    "decaying_identity_residual",
    "extend",
    "f_invariant",
    "f_spread",
    "finite_section",
    "growth_report",
    "init_basis",
    "kernel_entry",
    "kernel_window",
    "lemma2_residual",
    "recurrence_residual",
    "resolvent_residual",
    "section_inverse",
    "step_dual",
    "step_forward",
    "validate",
    "weyl_converged",
    "weyl_finite_section",
    "weyl_gap",
]
