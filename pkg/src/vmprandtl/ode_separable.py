"""Separable reduction: shooting for the self-similar profile, threshold scan, and the exact manifold.

The profile ``phi`` solves ``phi''' = k((phi')**2 - phi*phi'') + phi - 1`` with
``phi(0) = phi'(0) = 0`` and ``phi -> 1``; ``k`` is the product of the inertia ratio
and the slope of an affine interior trace (flat coast). Near infinity ``1 - phi``
is a combination of ``exp(-r*xi)`` over the roots ``r`` of ``r**3 - k r**2 + 1``:
two decaying roots and one negative (growing) root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from . import _kernels
from .errors import BadBracket, BlowUp, DomainError, NoConvergence, NotMonotone

SIGN_THRESHOLD = 1e-12
BLOWUP_CAP = 1e6
DIVERGE_CAP = 5.0
# total e-folds (slowest decay + growth) allowed over the shooting interval
HORIZON_EFOLDS = 30.0
MAX_STEPS = 400_000


def ode_rhs(k, phi, dphi, d2phi):
    return k * (dphi * dphi - phi * d2phi) + phi - 1.0


def linear_closed_form(xi):
    """Exact profile for ``k = 0``: ``phi''' = phi - 1`` with bounded tail."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0.0):
        raise DomainError("xi must be non-negative")
    r3 = math.sqrt(3.0)
    damp = np.exp(-0.5 * xi)
    phi = 1.0 - (2.0 / r3) * damp * np.cos(0.5 * r3 * xi - math.pi / 6.0)
    dphi = (2.0 / r3) * damp * np.sin(0.5 * r3 * xi)
    return phi, dphi


def characteristic_roots(k):
    """Roots of ``r**3 - k r**2 + 1``: ``(decaying, growing)``, decaying sorted by real part."""
    roots = np.roots([1.0, -float(k), 0.0, 1.0])
    real_neg = [r for r in roots if abs(r.imag) < 1e-12 and r.real < 0.0]
    if len(real_neg) != 1:
        raise DomainError(f"unexpected root structure for k = {k}")
    growing = float(real_neg[0].real)
    decaying = sorted((r for r in roots if r.real > 0.0), key=lambda r: (r.real, r.imag))
    return decaying, growing


def shooting_horizon(k, Xi):
    decaying, growing = characteristic_roots(k)
    return min(float(Xi), HORIZON_EFOLDS / (decaying[0].real + abs(growing)))


def _far_mismatch(k, growing, state):
    # annihilates both decaying modes of the linearised tail: residual measures the growing mode only
    phi, dphi, d2phi = state
    return -d2phi - (k - growing) * dphi - (1.0 / growing) * (1.0 - phi)


@dataclass
class OdeSolution:
    """Integrated separable profile on an adaptive grid."""

    alpha_param: float
    xi_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    shoot_value: float
    monotone: bool
    far_residual: float
    sign_change_xi: Optional[float] = None
    far_mismatch: Optional[float] = None
    xi_end: float = field(init=False)

    def __post_init__(self):
        self.xi_end = float(self.xi_grid[-1])

    @property
    def d3phi(self):
        return ode_rhs(self.alpha_param, self.phi, self.dphi, self.d2phi)

    @property
    def d4phi(self):
        k = self.alpha_param
        return k * (self.dphi * self.d2phi - self.phi * self.d3phi) + self.dphi

    @cached_property
    def _splines(self):
        x = self.xi_grid
        cols = (self.phi, self.dphi, self.d2phi, self.d3phi, self.d4phi)
        return [BPoly.from_derivatives(x, np.column_stack(cols[j:j + 3])) for j in range(3)]

    def evaluate(self, xi, order=0):
        """Quintic Hermite interpolant of ``phi`` (order 0), ``phi'`` (1) or ``phi''`` (2)."""
        return self._splines[order](np.clip(xi, 0.0, self.xi_end))

    @cached_property
    def tail_rate(self):
        return float(self.dphi[-1] / (1.0 - self.phi[-1]))

    def inverse(self, x):
        """``phi^{-1}`` for a monotone solution; beyond the grid the tail is continued exponentially."""
        if not self.monotone:
            raise NotMonotone("inverse requires a monotone profile")
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DomainError("phi^{-1} is defined on [0, 1]")
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        inside = flat <= self.phi[-1]
        out[inside] = self._invert_grid(flat[inside])
        tail = ~inside
        if np.any(tail):
            gap = 1.0 - flat[tail]
            with np.errstate(divide="ignore"):
                out[tail] = self.xi_end + np.log((1.0 - self.phi[-1]) / gap) / self.tail_rate
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def _invert_grid(self, x):
        grid = self.phi
        j = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, len(grid) - 2)
        lo = self.xi_grid[j].copy()
        hi = self.xi_grid[j + 1].copy()
        spline, dspline = self._splines[0], self._splines[1]
        xi = 0.5 * (lo + hi)
        for _ in range(80):
            f = spline(xi) - x
            lo = np.where(f < 0.0, xi, lo)
            hi = np.where(f < 0.0, hi, xi)
            slope = dspline(xi)
            with np.errstate(divide="ignore", invalid="ignore"):
                trial = xi - f / slope
            ok = np.isfinite(trial) & (trial > lo) & (trial < hi)
            new = np.where(ok, trial, 0.5 * (lo + hi))
            if np.all(np.abs(new - xi) <= 4e-16 * (1.0 + np.abs(xi))):
                xi = new
                break
            xi = new
        return np.where(x <= 0.0, 0.0, xi)

    def derivatives_at_level(self, x):
        """``(phi', phi'', phi''')`` at the points where ``phi = x``."""
        xi = np.asarray(self.inverse(x), dtype=float)
        beyond = xi > self.xi_end
        d1 = self.evaluate(xi, 1)
        d2 = self.evaluate(xi, 2)
        phi = np.where(beyond, x, self.evaluate(xi, 0))
        if np.any(beyond):
            gap = 1.0 - np.asarray(x, dtype=float)
            rate = self.tail_rate
            d1 = np.where(beyond, rate * gap, d1)
            d2 = np.where(beyond, -rate * rate * gap, d2)
        d3 = ode_rhs(self.alpha_param, phi, d1, d2)
        return d1, d2, d3

    def decay_rate(self, window=None):
        """Least-squares slope of ``-ln(1 - phi)`` over ``[xi_end/2, xi_end - 2]`` by default."""
        lo, hi = window if window is not None else (0.5 * self.xi_end, self.xi_end - 2.0)
        sel = (self.xi_grid >= lo) & (self.xi_grid <= hi)
        gap = 1.0 - self.phi[sel]
        if sel.sum() < 3 or np.any(gap <= 0.0):
            raise DomainError("decay window does not hold a positive, resolved tail")
        slope = np.polyfit(self.xi_grid[sel], np.log(gap), 1)[0]
        return float(-slope)

    def ode_residual(self):
        """Pointwise ODE residual of the interpolant, evaluated at cell midpoints."""
        x = self.xi_grid
        mid = 0.5 * (x[1:] + x[:-1])
        ph, d1, d2 = (self.evaluate(mid, j) for j in range(3))
        d3 = self._splines[2].derivative()(mid)
        return np.abs(d3 - ode_rhs(self.alpha_param, ph, d1, d2))

    def table(self):
        return np.column_stack([self.xi_grid, self.phi, self.dphi, self.d2phi])


def _first_sign_change(xi, dphi):
    """Index of the first step end where ``phi'`` drops below ``-SIGN_THRESHOLD``, if any."""
    bad = np.nonzero(dphi[1:] < -SIGN_THRESHOLD)[0]
    return None if bad.size == 0 else int(bad[0]) + 1


def _run(k, shoot_value, xi_end, tol, max_step, diverge_cap):
    return _kernels.dopri5_third_order(float(k), float(shoot_value), float(xi_end), float(tol),
                                       float(max_step), float(diverge_cap), BLOWUP_CAP, MAX_STEPS)


def integrate_ode(alpha_param, shoot_value, Xi, tol=1e-12, max_step=0.1) -> OdeSolution:
    """Integrate from ``(0, 0, shoot_value)`` to ``Xi`` with adaptive Dormand-Prince steps."""
    if not Xi > 0.0 or not tol > 0.0:
        raise DomainError("Xi and tol must be positive")
    xi, z, status = _run(alpha_param, shoot_value, Xi, tol, max_step, 0.0)
    if status == _kernels.ODE_BLOWUP:
        raise BlowUp(f"|phi| exceeded {BLOWUP_CAP:g} at xi = {xi[-1]:.6g}")
    if status != _kernels.ODE_OK:
        raise NoConvergence(f"integrator stopped at xi = {xi[-1]:.6g} (step cap)")
    idx = _first_sign_change(xi, z[:, 1])
    sol = OdeSolution(alpha_param=float(alpha_param), xi_grid=xi, phi=z[:, 0].copy(),
                      dphi=z[:, 1].copy(), d2phi=z[:, 2].copy(), shoot_value=float(shoot_value),
                      monotone=idx is None, far_residual=float(abs(1.0 - z[-1, 0])))
    if idx is not None:
        # locate the zero of phi' on the quintic interpolant inside the flagged step
        lo, hi = xi[idx - 1], xi[idx]
        if z[idx - 1, 1] > 0.0:
            sol.sign_change_xi = float(brentq(lambda t: float(sol.evaluate(t, 1)), lo, hi, xtol=1e-15))
        else:
            sol.sign_change_xi = float(lo)
    return sol


def shoot(alpha_param, Xi=40.0, tol=1e-12, s_max=10.0, scan_points=1001) -> OdeSolution:
    """Find ``phi''(0)`` in ``[0, s_max]`` that suppresses the growing far-field mode.

    The shooting interval is capped so the slowest decaying mode and the growing mode
    together span at most ``HORIZON_EFOLDS`` e-folds; beyond that the growing mode swamps
    double precision. A bracket counts only if trajectories on both sides reach the end
    of the interval, which discards sign flips between two divergent families.
    """
    k = float(alpha_param)
    if k < 0.0:
        raise DomainError("alpha_param must be non-negative")
    _, growing = characteristic_roots(k)
    xi_end = shooting_horizon(k, Xi)

    def mismatch(s):
        xi, z, status = _run(k, s, xi_end, tol, 0.5, DIVERGE_CAP)
        if status == _kernels.ODE_OK:
            return _far_mismatch(k, growing, z[-1]), True
        return math.copysign(1e10, 1.0 - z[-1, 0]), False

    grid = np.linspace(0.0, s_max, scan_points)
    values = [mismatch(s)[0] for s in grid]
    for lo, hi, f_lo, f_hi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f_lo == 0.0:
            root = lo
        elif f_lo * f_hi < 0.0:
            root = brentq(lambda s: mismatch(s)[0], lo, hi, xtol=1e-16, rtol=9e-16, maxiter=400)
        else:
            continue
        if _is_genuine(mismatch, root):
            sol = integrate_ode(k, root, xi_end, tol)
            sol.far_mismatch = float(abs(mismatch(root)[0]))
            return sol
    raise NoConvergence(f"no admissible shooting value in [0, {s_max}] for alpha_param = {k}")


def _is_genuine(mismatch, root):
    step = 1e-13 * max(1.0, abs(root))
    left, ok_l = mismatch(root - step)
    mid, ok_m = mismatch(root)
    right, ok_r = mismatch(root + step)
    return ok_l and ok_m and ok_r and left * right <= 0.0


def threshold_scan(lo, hi, bisection_tol=1e-4, Xi=40.0, tol=1e-12):
    """Bisect on the monotone flag for the critical ``alpha_param`` where recirculation appears."""
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise BadBracket("bracket must satisfy lo < hi")
    if shoot(lo, Xi, tol).monotone:
        raise BadBracket(f"profile at lo = {lo} is already monotone")
    if not shoot(hi, Xi, tol).monotone:
        raise BadBracket(f"profile at hi = {hi} is not monotone")
    while hi - lo > bisection_tol:
        mid = 0.5 * (lo + hi)
        if shoot(mid, Xi, tol).monotone:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def manifold_w(sol: OdeSolution, psi0_of_y, psi, y):
    """Separable solution ``psi0(y)**2 * phi'(phi^{-1}(psi/psi0(y)))**2`` of the transformed equation."""
    if not sol.monotone:
        raise NotMonotone("the separable manifold needs a monotone profile")
    top = float(psi0_of_y(y))
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < -1e-14 * top) or np.any(psi > top * (1.0 + 1e-14)):
        raise DomainError("psi outside [0, psi0(y)]")
    x = np.clip(psi / top, 0.0, 1.0)
    d1, _, _ = sol.derivatives_at_level(x)
    out = top * top * np.asarray(d1) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SeparableProfile:
    """Initial data taken from the separable manifold at the first latitude.

    Exposes the same sampler interface as the assembled piecewise profile.
    """

    solution: OdeSolution
    psi_end: float

    def __post_init__(self):
        if not self.solution.monotone:
            raise NotMonotone("separable initial data needs a monotone profile")

    def _derivs(self, psi):
        psi = np.asarray(psi, dtype=float)
        return self.solution.derivatives_at_level(np.clip(psi / self.psi_end, 0.0, 1.0))

    def w(self, psi):
        d1, _, _ = self._derivs(psi)
        return self.psi_end ** 2 * d1 ** 2

    def dw(self, psi):
        _, d2, _ = self._derivs(psi)
        return 2.0 * self.psi_end * d2

    def d2w(self, psi):
        d1, _, d3 = self._derivs(psi)
        with np.errstate(divide="ignore"):
            return 2.0 * d3 / d1

    def sup_norm(self, samples=4097):
        return float(np.max(self.w(np.linspace(0.0, self.psi_end, samples))))


def separable_initial_profile(alpha_param, psi_end, Xi=40.0, tol=1e-12):
    return SeparableProfile(shoot(alpha_param, Xi, tol), float(psi_end))
