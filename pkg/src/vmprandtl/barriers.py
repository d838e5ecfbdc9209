"""Explicit sub/super-solutions and the numerical sandwich checks against a marched field.

Parameter choices are constructive stand-ins for the existence arguments: fixed fractions of
the initial wall slope, feasibility ladders for the zone widths, and a doubling ladder for the
exponential rates.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .cubic_roots import RootBand, band_constants, root_a
from .errors import DomainError, OutsideZone
from .initial_data import _smoothstep
from .profiles import GyreSetup
from .vm_march import BoundaryData, SolutionField

LADDER_CAP_EXP = 16
VIOLATION_TOL = 1e-8
_DENSE = 20_001


def blanket_upper(profile, setup: GyreSetup, samples: int = 1025) -> float:
    """Uniform upper bound ``1 + sup w0 + Y sup(2 psi0 / (lambda0 nu))``."""
    sup_w0 = profile if isinstance(profile, (int, float)) else profile.sup_norm()
    y = np.linspace(0.0, setup.Y, samples)
    drift = float(np.max(2.0 * setup.psi0(y) / (setup.lambda0 * setup.nu(y))))
    return 1.0 + float(sup_w0) + setup.Y * drift


def partition(psi, top, delta):
    """Three-zone partition of unity with quintic ramps on ``[delta, 2 delta]`` and ``[top - 2 delta, top - delta]``."""
    if not 0.0 < 4.0 * delta <= top:
        raise DomainError("partition width must satisfy 0 < 4 delta <= psi0(y)")
    psi = np.asarray(psi, dtype=float)
    h_i = 1.0 - _smoothstep((psi - delta) / delta)[0]
    h_iii = _smoothstep((psi - (top - 2.0 * delta)) / delta)[0]
    # rounding in the ramp polynomial can leave weights a few ulps outside [0, 1]
    h_i, h_iii = np.clip(h_i, 0.0, 1.0), np.clip(h_iii, 0.0, 1.0)
    return h_i, np.clip(1.0 - h_i - h_iii, 0.0, 1.0), h_iii


def _zone3_formula(c, top, psi, eps, w_right):
    return c * c * (top - psi - eps) ** 2 + (w_right - c * c * eps * eps)


def zone3_eval(band: RootBand, profile, eps, psi, y, sign, setup: GyreSetup, delta=None):
    """``C(y)**2 (psi0 - psi - eps)**2 + w_r(y) - C(y)**2 eps**2`` with ``C = C+`` (sign > 0) or ``C-``."""
    if band.c_plus is None:
        raise DomainError("band constants are missing; use band_constants")
    if abs(band.y - float(y)) > 1e-12 * max(1.0, setup.Y):
        raise DomainError("band was computed at a different latitude")
    top = float(setup.psi0(y))
    psi_arr = np.asarray(psi, dtype=float)
    lower = top - delta if delta is not None else 0.0
    slack = 1e-12 * top
    if np.any(psi_arr > top - 2.0 * eps + slack) or np.any(psi_arr < lower - slack):
        raise OutsideZone("psi outside the right-hand zone")
    c = band.c_plus if sign > 0 else band.c_minus
    w_right = BoundaryData.build(profile, setup, eps).right(y)
    out = _zone3_formula(c, top, psi_arr, eps, w_right)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BlanketSub:
    A: float
    B: float
    M: float
    alpha0: Optional[float]
    delta0: float
    c_small: float


@dataclass(frozen=True)
class ThetaPlus:
    A: float
    B: float
    alpha: Optional[float]
    psi1: float


@dataclass(frozen=True)
class LocalPair:
    M_plus: float
    M_minus: float
    A_minus: float
    B_minus: float
    alpha: Optional[float]
    y1: Optional[float]
    delta: float


@dataclass
class BarrierSet:
    """Tuned barrier family; rates stay ``None`` until a field has been used to pick them."""

    setup: GyreSetup
    eps: float
    mu: float
    m_bar: float
    blanket_sub: BlanketSub
    zone3_delta: float
    theta_plus: ThetaPlus
    local_pair: LocalPair
    boundary: BoundaryData
    ladder_cap: int = LADDER_CAP_EXP
    _bands: dict = field(default_factory=dict, repr=False)

    def band(self, y):
        key = float(y)
        if key not in self._bands:
            self._bands[key] = band_constants(self.setup, key, self.mu)
        return self._bands[key]

    def params(self):
        return {"m_bar": self.m_bar, "mu": self.mu, "zone3_delta": self.zone3_delta,
                "blanket_sub": asdict(self.blanket_sub), "theta_plus": asdict(self.theta_plus),
                "local_pair": asdict(self.local_pair)}

    # --- evaluators on one latitude -------------------------------------------------
    def blanket_sub_values(self, psi, y, alpha0=None):
        b = self.blanket_sub
        alpha0 = b.alpha0 if alpha0 is None else alpha0
        if alpha0 is None:
            raise DomainError("alpha0 has not been selected")
        top = float(self.setup.psi0(y))
        psi = np.asarray(psi, dtype=float)
        h_i, h_ii, h_iii = partition(psi, top, b.delta0)
        decay = math.exp(-alpha0 * y)
        left = self.boundary.left(y) + (b.A * psi ** (4.0 / 3.0) + b.B * psi) * decay
        right = _zone3_formula(b.c_small, top, psi, self.eps, self.boundary.right(y))
        return h_i * left + h_ii * b.M * decay + h_iii * right

    def zone3_values(self, psi, y, sign):
        band = self.band(y)
        c = band.c_plus if sign > 0 else band.c_minus
        return _zone3_formula(c, float(self.setup.psi0(y)), np.asarray(psi, dtype=float), self.eps,
                              self.boundary.right(y))

    def theta_plus_values(self, psi, y, alpha=None):
        t = self.theta_plus
        alpha = t.alpha if alpha is None else alpha
        if alpha is None:
            raise DomainError("theta-plus rate has not been selected")
        psi = np.asarray(psi, dtype=float)
        # the capped exponent keeps ladder-cap evaluations finite
        return self.boundary.left(y) + (t.B * psi - t.A * psi ** (4.0 / 3.0)) * math.exp(min(alpha * y, 700.0))

    def local_values(self, psi, y, sign, alpha=None):
        lp = self.local_pair
        alpha = lp.alpha if alpha is None else alpha
        if alpha is None:
            raise DomainError("local-pair rate has not been selected")
        y1 = math.log(2.0) / alpha
        y0 = math.floor(y / y1 + 1e-12) * y1
        top = float(self.setup.psi0(y))
        psi = np.asarray(psi, dtype=float)
        h_i, h_ii, h_iii = partition(psi, top, lp.delta)
        if sign > 0:
            return (h_i + h_ii) * lp.M_plus * math.exp(alpha * (y - y0)) + h_iii * self.zone3_values(psi, y, +1)
        decay = math.exp(-alpha * (y - y0))
        left = self.boundary.left(y) + (lp.A_minus * psi ** (4.0 / 3.0) + lp.B_minus * psi) * decay
        return h_i * left + h_ii * lp.M_minus * decay + h_iii * self.zone3_values(psi, y, -1)


def blanket_sub_eval(bset: BarrierSet, profile, eps, psi, y):
    """Blanket sub-solution at ``(psi, y)``; ``profile`` and ``eps`` must match those of ``bset``."""
    if abs(float(eps) - bset.eps) > 1e-15:
        raise DomainError("eps does not match the barrier set")
    out = bset.blanket_sub_values(psi, y)
    return float(out) if np.ndim(out) == 0 else out


def _ladder(start, count):
    return [start * 2.0 ** (-j) for j in range(count)]


def build_barriers(profile, setup: GyreSetup, eps: float, mu: float = 0.1, field: Optional[SolutionField] = None,
                   alpha_cap_exp: int = LADDER_CAP_EXP) -> BarrierSet:
    """Choose barrier parameters; with a field, also pick the smallest admissible rates on the doubling ladder."""
    eps = float(eps)
    top = float(setup.psi0(0.0))
    ys = np.linspace(0.0, setup.Y, 257)
    top_min = float(np.min(setup.psi0(ys)))
    bdata = BoundaryData.build(profile, setup, eps)
    slope0 = float(profile.dw(0.0))
    if not slope0 > 0.0:
        raise DomainError("initial wall slope must be positive")
    b_under = 0.5 * slope0
    a_under = b_under
    c_small = 0.5 * min(root_a(setup, v).a for v in ys[::32])
    m_bar = blanket_upper(profile, setup)

    psi_dense = np.linspace(0.0, top - 2.0 * eps, _DENSE)
    w_init = np.asarray(profile.w(psi_dense + eps), dtype=float)

    feas_tol = 1e-12 * max(1.0, float(np.max(w_init)))
    delta0 = None
    for d in _ladder(top_min / 4.0, 40):
        left = psi_dense <= 2.0 * d
        lhs = bdata.left(0.0) + a_under * psi_dense[left] ** (4.0 / 3.0) + b_under * psi_dense[left]
        right = psi_dense >= top - 2.0 * d
        rhs = _zone3_formula(c_small, top, psi_dense[right], eps, bdata.right(0.0))
        if np.all(lhs <= w_init[left] + feas_tol) and np.all(rhs <= w_init[right] + feas_tol):
            delta0 = d
            break
    if delta0 is None:
        raise DomainError("no feasible blanket zone width on the ladder")
    mid = np.linspace(0.5 * delta0, top - 0.5 * delta0, 4097)
    m_under = 0.5 * float(np.min(profile.w(mid)))

    band0 = band_constants(setup, 0.0, mu)
    delta = None
    for d in _ladder(delta0, 40):
        sel = psi_dense >= top - d
        lo = _zone3_formula(band0.c_minus, top, psi_dense[sel], eps, bdata.right(0.0))
        hi = _zone3_formula(band0.c_plus, top, psi_dense[sel], eps, bdata.right(0.0))
        ws = w_init[sel]
        if np.all(lo <= ws + feas_tol) and np.all(ws <= hi + feas_tol):
            delta = d
            break
    if delta is None:
        raise DomainError("no feasible right-zone width on the ladder")

    b_plus, a_plus = 2.0 * slope0, b_under
    grid = np.linspace(0.0, top / 4.0, 4097)
    theta0 = bdata.left(0.0) + b_plus * grid - a_plus * grid ** (4.0 / 3.0)
    over = np.nonzero(theta0 >= m_bar)[0]
    psi1 = float(grid[over[0]]) if over.size else top / 4.0

    bset = BarrierSet(
        setup=setup, eps=eps, mu=float(mu), m_bar=m_bar,
        blanket_sub=BlanketSub(a_under, b_under, m_under, None, delta0, c_small),
        zone3_delta=delta,
        theta_plus=ThetaPlus(a_plus, b_plus, None, psi1),
        local_pair=LocalPair(m_bar, m_under, a_under, b_under, None, None, delta),
        boundary=bdata,
    )
    if field is not None:
        select_rates(bset, field, alpha_cap_exp)
    return bset


def _worst_blanket_lower(bset, field, alpha0):
    worst = -np.inf
    for k, y in enumerate(field.y_levels):
        psi = field.domain.psi(y)
        worst = max(worst, float(np.max(bset.blanket_sub_values(psi, y, alpha0) - field.w[k])))
    return worst


def _theta_mask(bset, field, y):
    return field.domain.psi(y) <= bset.theta_plus.psi1


def _worst_theta(bset, field, alpha):
    worst = -np.inf
    for k, y in enumerate(field.y_levels):
        sel = _theta_mask(bset, field, y)
        psi = field.domain.psi(y)[sel]
        worst = max(worst, float(np.max(field.w[k, sel] - bset.theta_plus_values(psi, y, alpha))))
    return worst


def _worst_local(bset, field, alpha):
    worst = -np.inf
    for k, y in enumerate(field.y_levels):
        psi = field.domain.psi(y)
        lo = bset.local_values(psi, y, -1, alpha) - field.w[k]
        hi = field.w[k] - bset.local_values(psi, y, +1, alpha)
        worst = max(worst, float(np.max(lo)), float(np.max(hi)))
    return worst


def _scale(field):
    return max(1.0, float(np.max(np.abs(field.w))))


def select_rates(bset: BarrierSet, field: SolutionField, alpha_cap_exp: int = LADDER_CAP_EXP):
    """Smallest rates on ``{1, 2, ..., 2**cap}`` for which the corresponding ordering holds on ``field``."""
    tol = VIOLATION_TOL * _scale(field)
    ladder = [2.0 ** j for j in range(alpha_cap_exp + 1)]
    bset.ladder_cap = int(alpha_cap_exp)

    def first(worst_fn):
        for a in ladder:
            if worst_fn(bset, field, a) <= tol:
                return a
        return None

    alpha0 = first(_worst_blanket_lower)
    alpha = first(_worst_theta)
    b = bset.blanket_sub
    bset.blanket_sub = BlanketSub(b.A, b.B, b.M, alpha0, b.delta0, b.c_small)
    t = bset.theta_plus
    bset.theta_plus = ThetaPlus(t.A, t.B, alpha, t.psi1)
    lp = bset.local_pair
    if alpha0 is not None:
        Y = bset.setup.Y
        shrink = math.exp(-alpha0 * Y)
        lp = LocalPair(lp.M_plus, b.M * shrink, b.A * shrink, b.B * shrink, None, None, lp.delta)
        bset.local_pair = lp
        local_alpha = first(_worst_local)
        if local_alpha is not None:
            bset.local_pair = LocalPair(lp.M_plus, lp.M_minus, lp.A_minus, lp.B_minus, local_alpha,
                                        math.log(2.0) / local_alpha, lp.delta)
    return bset


@dataclass
class CheckResult:
    name: str
    gated: bool
    passed: bool
    worst_violation: float
    count: int
    location: dict = field(default_factory=dict)
    note: str = ""


@dataclass
class BarrierReport:
    scale: float
    tolerance: float
    checks: list
    params: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.gated)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "scale": self.scale, "tolerance": self.tolerance,
                "checks": [asdict(c) for c in self.checks], "params": self.params}


def _ordering(name, field, tol, parts, gated=True, note=""):
    """``parts`` yields ``(k, mask, violation)`` with violation > 0 meaning the ordering is broken."""
    worst, loc, count = -np.inf, {}, 0
    for k, mask, viol in parts:
        if viol.size == 0:
            continue
        count += int(np.sum(viol > tol))
        j = int(np.argmax(viol))
        if viol[j] > worst:
            idx = int(np.nonzero(mask)[0][j])
            y = float(field.y_levels[k])
            worst = float(viol[j])
            loc = {"y": y, "level": k, "node": idx, "s": float(field.s[idx]),
                   "psi": float(field.domain.psi(y)[idx])}
    worst = worst if np.isfinite(worst) else 0.0
    return CheckResult(name, gated, worst <= tol, worst, count, loc, note)


def sandwich_check(field: SolutionField, bset: BarrierSet, band: Optional[RootBand] = None, profile=None,
                   setup: Optional[GyreSetup] = None) -> BarrierReport:
    """Measure every barrier ordering on the lattice.

    Gated: blanket pair (global), right-zone pair, left super-solution. The local pair is reported only.
    ``band`` (optional) overrides the band width through its ``mu``. ``profile`` and ``setup``
    are accepted for call-site symmetry; the barrier set already carries both.
    """
    if band is not None and band.mu is not None and band.mu != bset.mu:
        bset = dataclasses.replace(bset, mu=band.mu, _bands={})
    scale = _scale(field)
    tol = VIOLATION_TOL * scale
    levels = list(enumerate(field.y_levels))
    full = np.ones(field.s.size, dtype=bool)
    checks = []

    checks.append(_ordering("global_upper", field, tol,
                            ((k, full, field.w[k] - bset.m_bar) for k, _ in levels)))
    exhausted = f"no admissible rate on the ladder; evaluated at 2**{bset.ladder_cap}"
    top_rate = 2.0 ** bset.ladder_cap
    alpha0 = bset.blanket_sub.alpha0
    checks.append(_ordering(
        "blanket_lower", field, tol,
        ((k, full, bset.blanket_sub_values(field.domain.psi(y), y, alpha0 or top_rate) - field.w[k])
         for k, y in levels), note="" if alpha0 else "no admissible alpha0 found; " + exhausted))
    if alpha0 is None:
        checks[-1].passed = False

    def zone3_parts(sign):
        for k, y in levels:
            psi = field.domain.psi(y)
            mask = psi >= float(bset.setup.psi0(y)) - bset.zone3_delta
            vals = bset.zone3_values(psi[mask], y, sign)
            yield k, mask, (vals - field.w[k, mask]) if sign < 0 else (field.w[k, mask] - vals)

    checks.append(_ordering("zone3_lower", field, tol, zone3_parts(-1)))
    checks.append(_ordering("zone3_upper", field, tol, zone3_parts(+1)))
    alpha = bset.theta_plus.alpha

    def theta_parts():
        for k, y in levels:
            mask = _theta_mask(bset, field, y)
            psi = field.domain.psi(y)[mask]
            yield k, mask, field.w[k, mask] - bset.theta_plus_values(psi, y, alpha or top_rate)

    checks.append(_ordering("left_upper", field, tol, theta_parts(), note="" if alpha else exhausted))
    if alpha is None:
        checks[-1].passed = False
    if bset.local_pair.alpha is not None:
        checks.append(_ordering("local_lower", field, tol,
                                ((k, full, bset.local_values(field.domain.psi(y), y, -1) - field.w[k])
                                 for k, y in levels), gated=False, note="reported only"))
        checks.append(_ordering("local_upper", field, tol,
                                ((k, full, field.w[k] - bset.local_values(field.domain.psi(y), y, +1))
                                 for k, y in levels), gated=False, note="reported only"))
    else:
        checks.append(CheckResult("local_pair", False, False, float("inf"), 0, {},
                                  "no admissible local rate on the ladder (reported only)"))
    return BarrierReport(scale, tol, checks, bset.params())


def violation_margins(field: SolutionField, bset: BarrierSet):
    """Per-node tightest margins ``w - lower`` and ``upper - w`` over all applicable gated barriers."""
    m, n1 = field.w.shape
    lower = np.empty((m, n1))
    upper = np.empty((m, n1))
    for k, y in enumerate(field.y_levels):
        psi = field.domain.psi(y)
        w = field.w[k]
        lo = np.full(n1, -np.inf)
        hi = np.full(n1, bset.m_bar)
        if bset.blanket_sub.alpha0 is not None:
            lo = np.maximum(lo, bset.blanket_sub_values(psi, y))
        z3 = psi >= float(bset.setup.psi0(y)) - bset.zone3_delta
        lo[z3] = np.maximum(lo[z3], bset.zone3_values(psi[z3], y, -1))
        hi[z3] = np.minimum(hi[z3], bset.zone3_values(psi[z3], y, +1))
        if bset.theta_plus.alpha is not None:
            th = _theta_mask(bset, field, y)
            hi[th] = np.minimum(hi[th], bset.theta_plus_values(psi[th], y))
        lower[k] = w - lo
        upper[k] = hi - w
    return lower, upper


def _operator(fn, setup, eps, psi, y, h=1e-5):
    """``lambda0 nu dw/dy - nu^2 sqrt(w) d2w/dpsi2 - 2 (psi0 - psi - eps)`` by central differences."""
    dy = h * max(1.0, setup.Y)
    w = fn(psi, y)
    wy = (fn(psi, min(y + dy, setup.Y)) - fn(psi, max(y - dy, 0.0))) / (min(y + dy, setup.Y) - max(y - dy, 0.0))
    hp = h * max(1.0, float(setup.psi0(y)))
    wpp = (fn(psi + hp, y) - 2.0 * w + fn(psi - hp, y)) / (hp * hp)
    nu = float(setup.nu(y))
    return setup.lambda0 * nu * wy - nu * nu * np.sqrt(np.maximum(w, 0.0)) * wpp - 2.0 * (setup.psi0(y) - psi - eps)


def operator_spot_check(bset: BarrierSet, n_y: int = 9, n_psi: int = 33, seed: int = 0) -> dict:
    """Fraction of random interior samples where each barrier satisfies its differential inequality.

    Diagnostics only: the sandwich checks measure orderings, which is what the acceptance run gates on.
    """
    rng = np.random.default_rng(seed)
    setup, eps = bset.setup, bset.eps
    out = {}
    families = {"blanket_lower": (-1, lambda p, y: bset.blanket_sub_values(p, y))}
    if bset.local_pair.alpha is not None:
        families["local_lower"] = (-1, lambda p, y: bset.local_values(p, y, -1))
        families["local_upper"] = (+1, lambda p, y: bset.local_values(p, y, +1))
    if bset.theta_plus.alpha is not None:
        families["left_upper"] = (+1, lambda p, y: bset.theta_plus_values(p, y))
    families["zone3_lower"] = (-1, lambda p, y: bset.zone3_values(p, y, -1))
    families["zone3_upper"] = (+1, lambda p, y: bset.zone3_values(p, y, +1))
    for name, (sign, fn) in families.items():
        if name.startswith("blanket") and bset.blanket_sub.alpha0 is None:
            continue
        good = total = 0
        for y in rng.uniform(0.05, 0.95, n_y) * setup.Y:
            top = float(setup.psi0(y))
            if name.startswith("zone3"):
                lo_psi, hi_psi = top - bset.zone3_delta, top - 4.0 * eps
            elif name == "left_upper":
                lo_psi, hi_psi = 1e-3 * top, bset.theta_plus.psi1
            else:
                lo_psi, hi_psi = 1e-3 * top, top - 4.0 * eps
            psi = rng.uniform(lo_psi, hi_psi, n_psi)
            val = _operator(fn, setup, eps, psi, y)
            good += int(np.sum(sign * val >= 0.0))
            total += psi.size
        out[name] = good / total
    return out
