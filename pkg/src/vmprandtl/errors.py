"""Exception hierarchy shared by every module."""


class VMPrandtlError(Exception):
    """Base class for all package errors."""


class DomainError(VMPrandtlError, ValueError):
    """Argument outside the documented domain."""


class NoPositiveRoot(VMPrandtlError):
    """The governing cubic has no positive real root (kappa below threshold)."""


class BandInfeasible(VMPrandtlError):
    """No derivative band exists because kappa <= 2."""


class NotPositive(VMPrandtlError):
    """An assembled initial profile is not strictly positive."""


class NonPositiveTrial(VMPrandtlError):
    """A residual was requested at a non-positive trial state."""


class NewtonDiverged(VMPrandtlError):
    """Newton iteration cap reached without meeting the tolerance."""


class NonPositiveW(VMPrandtlError):
    """Positivity could not be kept, even at minimum damping or along a quadrature path."""


class StepUnderflow(VMPrandtlError):
    """The adaptive march needed a step below dy_min."""


class BlowUp(VMPrandtlError):
    """ODE solution exceeded the blow-up bound before the end of the interval."""


class NoConvergence(VMPrandtlError):
    """Shooting could not bracket or converge on the far-field condition."""


class BadBracket(VMPrandtlError):
    """Threshold scan bracket does not straddle the monotonicity transition."""


class NotMonotone(VMPrandtlError):
    """Operation requires a monotone separable profile."""


class OutsideZone(VMPrandtlError, ValueError):
    """Barrier evaluated outside the zone where it is defined."""


class WindowTooShort(VMPrandtlError):
    """Decay-fit window holds too few resolved samples."""


class ConfigError(VMPrandtlError, ValueError):
    """Malformed or unknown run-configuration content."""
