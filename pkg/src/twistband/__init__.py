"""Band-structure and Mourre-estimate verification toolkit for twisted
quantum waveguides."""

from .geometry import CrossSectionGrid, GeometrySpec, build_grid
from .operators import DiscreteOperators, assemble_operators, weyl_check
from .fiber import EigResult, FiberOperator, assemble_fiber, eig_hermitian, fh_derivative
from .bands import BandTable, Branch, bkrs_fit, sweep_bands, track_branches
from .critical import (
    CriticalLevelSet,
    CriticalPoint,
    WindowBound,
    band_window_bound,
    critical_set,
    find_crossings,
    find_stationary,
)
from .bumps import BumpGamma, CutoffChi
from .mourre import MourreReport, MourreWindow, build_gamma, build_window, verify_mourre
from .flow import FlowResult, SampledFunction, apply_group, generator_check, integrate_flow
from .fourier import FourierKernel, position_form_check
from .tube import TubeOperator, TubeSpectrum, TwistProfile, assemble_tube, hs_diagnostic, tube_low_spectrum

__version__ = "0.1.0"

__all__ = [
    "BandTable", "Branch", "BumpGamma", "CriticalLevelSet", "CriticalPoint",
    "CrossSectionGrid", "CutoffChi", "DiscreteOperators", "EigResult",
    "FiberOperator", "FlowResult", "FourierKernel", "GeometrySpec",
    "MourreReport", "MourreWindow", "SampledFunction", "TubeOperator",
    "TubeSpectrum", "TwistProfile", "WindowBound", "apply_group",
    "assemble_fiber", "assemble_operators", "assemble_tube",
    "band_window_bound", "bkrs_fit", "build_gamma", "build_grid",
    "build_window", "critical_set", "eig_hermitian", "fh_derivative",
    "find_crossings", "find_stationary", "generator_check", "hs_diagnostic",
    "integrate_flow", "position_form_check", "sweep_bands", "track_branches",
    "tube_low_spectrum", "verify_mourre", "weyl_check",
]
