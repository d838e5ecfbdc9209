"""Steady rotating boundary-layer solver in von Mises variables, with a verification harness.

The top-level namespace re-exports the main entry points of each module.
"""

__version__ = "0.1.0"

from ._accel import HAVE_NUMBA, backend
from .barriers import BarrierReport, BarrierSet, blanket_upper, build_barriers, sandwich_check, zone3_eval
from .cubic_roots import RootBand, band_constants, root_a, scaled_roots
from .errors import (BadBracket, BandInfeasible, BlowUp, ConfigError, DomainError, NewtonDiverged,
                     NoConvergence, NonPositiveTrial, NonPositiveW, NoPositiveRoot, NotMonotone, NotPositive,
                     OutsideZone, StepUnderflow, VMPrandtlError, WindowTooShort)
from .initial_data import InitialProfile, build_default_w0, compatibility_report
from .ode_separable import OdeSolution, integrate_ode, manifold_w, separable_initial_profile, shoot
from .physical_fields import PhysicalField, decay_fit, reconstruct_uv, xi_of_psi
from .profiles import GyreSetup, Profile, benchmark_setup, kappa_of, nu_of, validate
from .vm_march import GridConfig, SolutionField, StepConfig, derivative_diagnostics, march

__all__ = ["BadBracket", "BandInfeasible", "BarrierReport", "BarrierSet", "BlowUp", "ConfigError",
    "DomainError", "GridConfig", "GyreSetup", "HAVE_NUMBA", "InitialProfile", "NewtonDiverged",
    "NoConvergence", "NoPositiveRoot", "NonPositiveTrial", "NonPositiveW", "NotMonotone", "NotPositive",
    "OdeSolution", "OutsideZone", "PhysicalField", "Profile", "RootBand", "SolutionField", "StepConfig",
    "StepUnderflow", "VMPrandtlError", "WindowTooShort", "backend", "band_constants", "benchmark_setup",
    "blanket_upper", "build_barriers", "build_default_w0", "compatibility_report", "decay_fit",
    "derivative_diagnostics", "integrate_ode", "kappa_of", "manifold_w", "march", "nu_of",
    "reconstruct_uv", "root_a", "sandwich_check", "scaled_roots", "separable_initial_profile", "shoot",
    "validate", "xi_of_psi", "zone3_eval"]
