"""Back from the transformed variables: coast-normal coordinate, both velocity components, decay rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cubic_roots import root_a
from .errors import DomainError, NonPositiveW, WindowTooShort
from .vm_march import SolutionField, derivative_diagnostics

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# relative cell increment below which the closed-form cell integrals lose digits to cancellation
_FLAT_CELL = 1e-4


def _graded_breaks(length, levels=48, ratio=0.5):
    """Breakpoints on [0, length] refining geometrically toward ``length``."""
    gaps = length * ratio ** np.arange(levels + 1)
    return np.concatenate(([0.0], length - gaps[1:], [length]))


def xi_of_psi(sampler, psi):
    """``int_0^psi ds / sqrt(w(s))`` for a callable ``w`` positive on ``(0, psi]``.

    The substitution ``s = t**2`` removes the inverse square-root singularity of a
    linearly vanishing ``w`` at the left end; cells are graded geometrically toward the
    upper limit to resolve a quadratically vanishing ``w`` just beyond it.
    """
    psi = float(psi)
    if psi < 0.0:
        raise DomainError("psi must be non-negative")
    if psi == 0.0:
        return 0.0
    breaks = _graded_breaks(np.sqrt(psi))
    lo, hi = breaks[:-1], breaks[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    w = np.asarray(sampler(t * t), dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
        raise NonPositiveW("w is not positive along the quadrature path")
    vals = 2.0 * t / np.sqrt(w)
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * vals))


def _logmean(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = (b - a) / np.log(b / a)
    return np.where(np.abs(b - a) <= _FLAT_CELL * a, 0.5 * (a + b), lm)


def xi_lattice(psi, w):
    """Cumulative coast-normal coordinate on a lattice column.

    Cells in the left half use the rule exact for linear ``w``; cells in the right half
    the rule exact for linear ``sqrt(w)``, matching the local behaviour at each end.
    """
    if np.any(w <= 0.0):
        raise NonPositiveW("w is not positive on the lattice column")
    h = np.diff(psi)
    v = np.sqrt(w)
    va, vb = v[:-1], v[1:]
    left = 2.0 * h / (va + vb)
    right = h / _logmean(va, vb)
    mid = 0.5 * (psi[:-1] + psi[1:])
    cell = np.where(mid <= 0.5 * psi[-1], left, right)
    return np.concatenate(([0.0], np.cumsum(cell)))


def _cell_integrals(psi, w, q):
    """``int q / w**1.5`` over each cell with linear ``q`` and the same local model for ``w`` as ``xi``."""
    h = np.diff(psi)
    wa, wb = w[:-1], w[1:]
    qa, qb = q[:-1], q[1:]
    dq = qb - qa
    va, vb = np.sqrt(wa), np.sqrt(wb)
    dw, dv = wb - wa, vb - va
    with np.errstate(divide="ignore", invalid="ignore"):
        # linear w: substitute W = w(t)
        lin = h / dw * ((qa - dq * wa / dw) * 2.0 * (1.0 / va - 1.0 / vb) + dq / dw * 2.0 * (vb - va))
        # linear sqrt(w): substitute V = v(t)
        sq = h / dv * ((qa - dq * va / dv) * 0.5 * (1.0 / va ** 2 - 1.0 / vb ** 2) + dq / dv * (1.0 / va - 1.0 / vb))
    # nearly flat cells: Gauss-Legendre on the same models
    nodes, weights = np.polynomial.legendre.leggauss(4)
    t, wt = 0.5 * (1.0 + nodes), 0.5 * weights
    qt = qa[:, None] + dq[:, None] * t[None, :]
    w_lin = wa[:, None] + dw[:, None] * t[None, :]
    w_sq = (va[:, None] + dv[:, None] * t[None, :]) ** 2
    gl_lin = h * np.sum(wt * qt / w_lin ** 1.5, axis=1)
    gl_sq = h * np.sum(wt * qt / w_sq ** 1.5, axis=1)
    lin = np.where(np.abs(dw) <= _FLAT_CELL * wa, gl_lin, lin)
    sq = np.where(np.abs(dv) <= _FLAT_CELL * va, gl_sq, sq)
    mid = 0.5 * (psi[:-1] + psi[1:])
    return np.where(mid <= 0.5 * psi[-1], lin, sq)


@dataclass
class PhysicalLevel:
    y: float
    eps: float
    psi0: float
    psi: np.ndarray
    xi: np.ndarray
    w: np.ndarray
    v: np.ndarray
    u: np.ndarray

    @property
    def distance(self):
        return self.psi0 - self.psi - self.eps

    def table(self):
        return np.column_stack([self.xi, self.psi, self.v, self.u])


@dataclass
class DecayFit:
    y: float
    rate: float
    prefactor: float
    window: tuple
    samples: int
    a: Optional[float] = None

    @property
    def relative_gap(self):
        return None if self.a is None else abs(self.rate - self.a) / self.a

    def to_dict(self):
        return {"y": self.y, "rate": self.rate, "prefactor": self.prefactor, "a": self.a,
                "relative_gap": self.relative_gap, "window": list(self.window), "samples": self.samples}


@dataclass
class PhysicalField:
    levels: list
    fits: dict = field(default_factory=dict)

    def level(self, y, tol=1e-12):
        for lev in self.levels:
            if abs(lev.y - y) <= tol * max(1.0, abs(y)):
                return lev
        raise DomainError(f"no reconstructed level at y = {y}")


def reconstruct_uv(field: SolutionField, setup=None) -> PhysicalField:
    """``v = sqrt(w)``, ``xi`` by cell quadrature and ``u = -sqrt(w)/2 * int_0^psi q / w**1.5``."""
    if field.q is None:
        derivative_diagnostics(field, setup)
    setup = field.setup if setup is None else setup
    levels = []
    for k, y in enumerate(field.y_levels):
        psi = field.domain.psi(y)
        w = field.w[k]
        xi = xi_lattice(psi, w)
        inner = np.concatenate(([0.0], np.cumsum(_cell_integrals(psi, w, field.q[k]))))
        v = np.sqrt(w)
        u = -0.5 * v * inner
        levels.append(PhysicalLevel(float(y), field.eps, float(setup.psi0(y)), psi, xi, w, v, u))
    return PhysicalField(levels)


def decay_fit(phys: PhysicalField, y: float, window=None, min_samples=4, setup=None) -> DecayFit:
    """Least-squares slope of ``ln(psi0 - psi - eps)`` against ``xi`` over the last resolved decade.

    The default window is ``eps <= psi0 - psi - eps <= 10 eps``; ``window`` overrides it with
    explicit bounds on that distance.
    """
    lev = phys.level(y)
    d = lev.distance
    if window is None:
        floor = max(lev.eps, float(np.min(d[d > 0.0]))) if np.any(d > 0.0) else 0.0
        window = (floor, 10.0 * floor)
    lo, hi = window
    sel = (d >= lo * (1.0 - 1e-9)) & (d <= hi * (1.0 + 1e-9)) & (d > 0.0)
    if int(sel.sum()) < min_samples:
        raise WindowTooShort(f"only {int(sel.sum())} samples in the decay window at y = {y}")
    slope, intercept = np.polyfit(lev.xi[sel], np.log(d[sel]), 1)
    a = root_a(setup, y).a if setup is not None else None
    fit = DecayFit(float(y), float(-slope), float(np.exp(intercept)), (float(lo), float(hi)), int(sel.sum()), a)
    phys.fits[float(y)] = fit
    return fit
