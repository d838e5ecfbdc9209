"""Admissible initial profiles on ``[0, psi0(0)]`` and the corner regularisation quantity.

The default profile is a three-term left expansion glued to the quadratic right model by a
quintic smoothstep, so both corner conditions hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cubic_roots import root_a
from .errors import DomainError, NotPositive
from .profiles import GyreSetup

DEFAULT_WINDOW = (0.25, 0.75)
SHRINK_FACTOR = 0.8
MAX_SHRINKS = 40
POSITIVITY_SAMPLES = 100_000


def _smoothstep(t):
    """Quintic ramp 0 -> 1 with vanishing first and second derivatives at both ends, and its derivatives."""
    t = np.clip(t, 0.0, 1.0)
    h = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    dh = 30.0 * t * t * (1.0 - t) ** 2
    d2h = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return h, dh, d2h


@dataclass(frozen=True)
class InitialProfile:
    """Piecewise initial profile: left expansion, right quadratic, smooth blend between them."""

    b_left: float
    a_three_halves: float
    c_quadratic: float
    blend_window: tuple
    right_coefficient: float
    psi_end: float

    def _left(self, psi):
        r = np.sqrt(psi)
        b, a, c = self.b_left, self.a_three_halves, self.c_quadratic
        with np.errstate(divide="ignore", invalid="ignore"):
            return (b * psi + a * psi * r + c * psi * psi,
                    b + 1.5 * a * r + 2.0 * c * psi,
                    0.75 * a / r + 2.0 * c)

    def _right(self, psi):
        d = self.psi_end - psi
        k = self.right_coefficient
        return k * d * d, -2.0 * k * d, np.full_like(d, 2.0 * k)

    def _all(self, psi):
        psi = np.asarray(psi, dtype=float)
        if np.any(psi < 0.0) or np.any(psi > self.psi_end * (1.0 + 1e-14)):
            raise DomainError("initial profile evaluated outside [0, psi0(0)]")
        lo, hi = self.blend_window
        span = hi - lo
        h, dh, d2h = _smoothstep((psi - lo) / span)
        dh, d2h = dh / span, d2h / (span * span)
        l0, l1, l2 = self._left(psi)
        r0, r1, r2 = self._right(psi)
        # keep the left expansion out of pure-right regions (its 1/sqrt term is singular only at 0)
        l0, l1, l2 = (np.where(h < 1.0, v, 0.0) for v in (l0, l1, l2))
        w = (1.0 - h) * l0 + h * r0
        dw = (1.0 - h) * l1 + h * r1 + dh * (r0 - l0)
        d2w = (1.0 - h) * l2 + h * r2 + 2.0 * dh * (r1 - l1) + d2h * (r0 - l0)
        return w, dw, d2w

    def w(self, psi):
        return self._all(psi)[0]

    def dw(self, psi):
        return self._all(psi)[1]

    def d2w(self, psi):
        return self._all(psi)[2]

    def sup_norm(self, samples=4097):
        return float(np.max(self.w(np.linspace(0.0, self.psi_end, samples))))

    def table(self, samples=1025):
        psi = np.linspace(0.0, self.psi_end, samples)
        w, dw, d2w = self._all(psi)
        return np.column_stack([psi, w, dw, d2w])

    def with_coefficients(self, **changes):
        """Copy with some coefficients replaced (planted-defect studies)."""
        fields = dict(b_left=self.b_left, a_three_halves=self.a_three_halves,
                      c_quadratic=self.c_quadratic, blend_window=self.blend_window,
                      right_coefficient=self.right_coefficient, psi_end=self.psi_end)
        fields.update(changes)
        return InitialProfile(**fields)


def left_coefficients(setup: GyreSetup, b_left: float):
    """Coefficients of ``psi**1.5`` and ``psi**2`` that make the left corner residual O(psi)."""
    top = float(setup.psi0(0.0))
    nu0 = float(setup.nu(0.0))
    a = -8.0 * top / (3.0 * nu0 * nu0 * math.sqrt(b_left))
    c = -3.0 * a * a / (16.0 * b_left)
    return a, c


def _is_positive(profile, samples=POSITIVITY_SAMPLES):
    psi = np.linspace(0.0, profile.psi_end, samples + 1)[1:-1]
    return bool(np.all(profile.w(psi) > 0.0))


def build_default_w0(setup: GyreSetup, B: float = 1.0, window=DEFAULT_WINDOW) -> InitialProfile:
    """Assemble the default compatible profile, shrinking the blend window leftward until it is positive."""
    B = float(B)
    if not B > 0.0:
        raise DomainError("B must be positive")
    top = float(setup.psi0(0.0))
    a, c = left_coefficients(setup, B)
    right = root_a(setup, 0.0).a ** 2
    lo, hi = window
    if not 0.0 < lo < hi < 1.0:
        raise DomainError("blend window fractions must satisfy 0 < lo < hi < 1")
    for _ in range(MAX_SHRINKS):
        prof = InitialProfile(B, a, c, (lo * top, hi * top), right, top)
        if _is_positive(prof):
            return prof
        lo, hi = lo * SHRINK_FACTOR, hi * SHRINK_FACTOR
    raise NotPositive(f"no positive blend found for B = {B}; increase B")


def left_positive_width(setup: GyreSetup, B: float) -> float:
    """Largest psi up to which the left expansion alone stays positive."""
    a, c = left_coefficients(setup, B)
    # B + a r + c r^2 = 0 with r = sqrt(psi); c < 0 gives exactly one positive root
    r = (-a - math.sqrt(a * a - 4.0 * c * B)) / (2.0 * c)
    return r * r


@dataclass
class CompatibilityReport:
    left_slope: float
    left_pass: bool
    right_ratio: float
    right_target: float
    right_rel_error: float
    right_pass: bool

    @property
    def passed(self):
        return self.left_pass and self.right_pass

    def to_dict(self):
        d = dict(vars(self))
        d["passed"] = self.passed
        return d


def corner_residual(profile, setup: GyreSetup, psi):
    """``nu(0)**2 sqrt(w0) w0'' + 2(psi0(0) - psi)``; vanishes at the left corner for compatible data."""
    nu0 = float(setup.nu(0.0))
    top = float(setup.psi0(0.0))
    psi = np.asarray(psi, dtype=float)
    return nu0 * nu0 * np.sqrt(profile.w(psi)) * profile.d2w(psi) + 2.0 * (top - psi)


def compatibility_report(profile, setup: GyreSetup, left_range=(1e-6, 1e-2), samples=41,
                         right_fraction=0.01, tol=1e-3) -> CompatibilityReport:
    """Left: log-log slope of the corner residual (pass at >= 0.95). Right: quadratic vanishing rate."""
    psi = np.geomspace(left_range[0], left_range[1], samples)
    res = np.abs(corner_residual(profile, setup, psi))
    slope = float(np.polyfit(np.log(psi), np.log(np.maximum(res, 1e-300)), 1)[0])
    top = float(setup.psi0(0.0))
    target = root_a(setup, 0.0).a ** 2
    d = np.geomspace(1e-6, right_fraction, samples) * top
    ratios = profile.w(top - d) / d ** 2
    k = int(np.argmax(np.abs(ratios - target)))
    rel = float(abs(ratios[k] - target) / target)
    return CompatibilityReport(left_slope=slope, left_pass=slope >= 0.95, right_ratio=float(ratios[k]),
                               right_target=target, right_rel_error=rel, right_pass=rel <= tol)


def mu_of(profile, setup: GyreSetup, s: float) -> float:
    """Corner regularisation quantity ``nu(0)**2 sqrt(w0(s)) w0''(s) + 2(psi0(0) - s)``."""
    top = float(setup.psi0(0.0))
    s = float(s)
    if not 0.0 < s < top:
        raise DomainError("s must lie in (0, psi0(0))")
    return float(corner_residual(profile, setup, s))


@dataclass(frozen=True)
class ScaledProfile:
    """``factor * base`` sampler (comparison studies keep the base profile's boundary data)."""

    base: object
    factor: float

    @property
    def psi_end(self):
        return self.base.psi_end

    def w(self, psi):
        return self.factor * self.base.w(psi)

    def dw(self, psi):
        return self.factor * self.base.dw(psi)

    def d2w(self, psi):
        return self.factor * self.base.d2w(psi)

    def sup_norm(self, samples=4097):
        return self.factor * self.base.sup_norm(samples)
