"""Positive roots of the governing cubic and the barrier/derivative bands built from them.

All root solving happens in the scaled variable ``tau = t * nu**(2/3)``, where the
cubic collapses to ``tau**3 - kappa*tau**2 + 1`` and only ``kappa`` matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

from .errors import BandInfeasible, DomainError, NoPositiveRoot
from .profiles import KAPPA_CRIT, GyreSetup

DOUBLE_ROOT_WINDOW = 1e-9


@dataclass(frozen=True)
class RootBand:
    """Root analysis at one latitude; band fields stay ``None`` until :func:`band_constants`."""

    y: float
    kappa: float
    nu: float
    a: float
    a_second: float
    is_double: bool
    c_minus: Optional[float] = None
    c_plus: Optional[float] = None
    e_plus: Optional[float] = None
    e_minus: Optional[float] = None
    mu: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def _scaled(tau, kappa):
    return tau * tau * (tau - kappa) + 1.0


def _bisect(kappa, lo, hi, tol):
    f_lo = _scaled(lo, kappa)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _scaled(mid, kappa)
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish(tau, kappa, steps=2):
    for _ in range(steps):
        slope = tau * (3.0 * tau - 2.0 * kappa)
        if slope == 0.0:
            break
        tau -= _scaled(tau, kappa) / slope
    return tau


def scaled_roots(kappa: float):
    """Return ``(tau1, tau2, is_double)``, the two positive roots of ``tau**3 - kappa*tau**2 + 1``.

    ``tau1`` lies in ``(0, 2*kappa/3]`` and ``tau2`` in ``[2*kappa/3, kappa)``.
    """
    kappa = float(kappa)
    if not math.isfinite(kappa):
        raise DomainError("kappa must be finite")
    if abs(kappa - KAPPA_CRIT) <= DOUBLE_ROOT_WINDOW:
        tau = 2.0 * kappa / 3.0
        return tau, tau, True
    if kappa < KAPPA_CRIT:
        raise NoPositiveRoot(f"kappa = {kappa:.12g} is below the real-root threshold {KAPPA_CRIT:.12g}")
    turn = 2.0 * kappa / 3.0
    tau1 = _polish(_bisect(kappa, 0.0, turn, 1e-9), kappa)
    tau2 = _polish(_bisect(kappa, turn, kappa, 1e-9), kappa)
    return tau1, tau2, False


def eval_cubic(setup: GyreSetup, y: float, t: float) -> float:
    """``nu**2 t**3 - nu*lambda0*psi0'*t**2 + 1`` at latitude ``y``."""
    y = float(setup.check_y(y))
    nu = float(setup.nu(y))
    slope = setup.lambda0 * float(setup.psi0.d1(y))
    return nu * nu * t ** 3 - nu * slope * t ** 2 + 1.0


def eval_cubic_slope(setup: GyreSetup, y: float, t: float) -> float:
    y = float(setup.check_y(y))
    nu = float(setup.nu(y))
    slope = setup.lambda0 * float(setup.psi0.d1(y))
    return 3.0 * nu * nu * t * t - 2.0 * nu * slope * t


def eval_band_quadratic(setup: GyreSetup, y: float, a: float, e: float) -> float:
    """Quadratic ``nu**2/(2a) E**2 - lambda0*nu*psi0'*E + 2`` whose roots are ``2a**2`` and ``2/(a nu**2)``."""
    y = float(setup.check_y(y))
    nu = float(setup.nu(y))
    slope = setup.lambda0 * float(setup.psi0.d1(y))
    return nu * nu / (2.0 * a) * e * e - slope * nu * e + 2.0


def root_a(setup: GyreSetup, y: float) -> RootBand:
    """Smallest and second positive root of the cubic at latitude ``y``."""
    y = float(setup.check_y(y))
    nu = float(setup.nu(y))
    kappa = float(setup.kappa(y))
    tau1, tau2, double = scaled_roots(kappa)
    scale = nu ** (-2.0 / 3.0)
    a, a2 = tau1 * scale, tau2 * scale
    if not double:
        # final Newton pass on the unscaled cubic so the residual bound holds as stated
        a = _polish_unscaled(setup, y, a)
        a2 = _polish_unscaled(setup, y, a2)
    return RootBand(y=y, kappa=kappa, nu=nu, a=a, a_second=a2, is_double=double)


def _polish_unscaled(setup, y, t):
    for _ in range(2):
        f = eval_cubic(setup, y, t)
        df = eval_cubic_slope(setup, y, t)
        if df == 0.0 or abs(f) <= 1e-12 * max(1.0, abs(df)):
            break
        t -= f / df
    return t


def band_constants(setup: GyreSetup, y: float, mu: float = 0.1) -> RootBand:
    """Attach ``C-`` < a < ``C+`` and the derivative band ``E+`` < 2a**2 < ``E-``.

    ``C-`` is ``a*(1-mu)``. ``C+`` is ``a*(1+mu)`` unless that breaks either upper constraint,
    in which case it moves to the midpoint between ``a`` and the binding constraint.
    """
    mu = float(mu)
    if not 0.0 < mu < 1.0:
        raise DomainError("mu must lie in (0, 1)")
    band = root_a(setup, y)
    if band.kappa <= 2.0:
        raise BandInfeasible(f"kappa = {band.kappa:.12g} <= 2: no derivative band exists")
    nu, a = band.nu, band.a
    slope = setup.lambda0 * float(setup.psi0.d1(band.y))
    cap = min(2.0 * slope / (3.0 * nu), 1.0 / (nu * math.sqrt(a)))
    c_minus = a * (1.0 - mu)
    c_plus = a * (1.0 + mu)
    if c_plus >= cap:
        c_plus = 0.5 * (a + cap)
    e_plus = 2.0 * c_minus ** 2 * (1.0 - mu)
    e_minus = 0.5 * (2.0 * c_plus ** 2 + 2.0 / (a * nu * nu))
    if not (0.0 < e_plus < 2.0 * c_minus ** 2 < 2.0 * a * a < 2.0 * c_plus ** 2 < e_minus < 2.0 / (a * nu * nu)):
        raise BandInfeasible(f"band ordering collapsed in floating point at y = {band.y}")
    return RootBand(y=band.y, kappa=band.kappa, nu=nu, a=a, a_second=band.a_second,
                    is_double=band.is_double, c_minus=c_minus, c_plus=c_plus,
                    e_plus=e_plus, e_minus=e_minus, mu=mu)


def root_a_derivative(setup: GyreSetup, y: float) -> float:
    """Latitude derivative of the smallest root, from implicit differentiation of the scaled cubic."""
    band = root_a(setup, y)
    if band.is_double:
        raise DomainError("the smallest root is not differentiable at the double-root threshold")
    y = band.y
    nu, kappa = band.nu, band.kappa
    tau = band.a * nu ** (2.0 / 3.0)
    dnu = float(setup.dnu(y))
    slope = float(setup.psi0.d1(y))
    curv = float(setup.psi0.d2(y))
    dkappa = setup.lambda0 * (curv * nu ** (-1.0 / 3.0) - slope * nu ** (-4.0 / 3.0) * dnu / 3.0)
    dtau = tau / (3.0 * tau - 2.0 * kappa) * dkappa
    return dtau * nu ** (-2.0 / 3.0) - (2.0 / 3.0) * tau * nu ** (-5.0 / 3.0) * dnu
