"""Implicit latitude march for the regularised transformed equation on a moving, mapped domain.

Unknown ``w(psi, y)`` lives on ``0 <= psi <= L(y) = psi0(y) - 2 eps``. The map ``s = psi / L(y)``
fixes the domain to ``[0, 1]`` at the cost of an advection term ``-s (L'/L) dw/ds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _accel
from ._kernels import assemble_step, solve_band
from .cubic_roots import band_constants, root_a, root_a_derivative
from .errors import DomainError, NewtonDiverged, NonPositiveTrial, NonPositiveW, StepUnderflow
from .initial_data import mu_of
from .profiles import GyreSetup, validate


@dataclass(frozen=True)
class GridConfig:
    n_s: int = 512
    clustering: float = 3.0


@dataclass(frozen=True)
class StepConfig:
    """March controls. ``None`` entries scale with the latitude span ``Y``."""

    dy0: Optional[float] = None  # default 1e-3 * Y
    dy_min: Optional[float] = None  # default 1e-9 * Y
    dy_max: Optional[float] = None  # default dy0
    newton_tol: float = 1e-10
    max_iter: int = 30
    min_damping: float = 2.0 ** -30
    grow_after: int = 5
    n_out: int = 20

    def resolved(self, Y):
        dy0 = self.dy0 if self.dy0 is not None else 1e-3 * Y
        dy_min = self.dy_min if self.dy_min is not None else 1e-9 * Y
        dy_max = self.dy_max if self.dy_max is not None else dy0
        if not 0.0 < dy_min <= dy0 <= dy_max:
            raise DomainError("need 0 < dy_min <= dy0 <= dy_max")
        return dy0, dy_min, dy_max


def stretched_nodes(n_s: int, clustering: float) -> np.ndarray:
    """Nodes on [0, 1] clustered toward both ends by a tanh map (uniform when clustering is 0)."""
    if n_s < 4:
        raise DomainError("n_s must be at least 4")
    eta = np.linspace(0.0, 1.0, n_s + 1)
    if clustering > 0.0:
        s = 0.5 * (1.0 + np.tanh(clustering * (eta - 0.5)) / math.tanh(0.5 * clustering))
    else:
        s = eta
    s[0], s[-1] = 0.0, 1.0
    return s


def difference_stencils(s: np.ndarray):
    """Coefficients of the second-order first and second derivative operators on a nonuniform grid.

    ``d1[j, i]`` multiplies node ``i - 1 + j``; the first derivative is upwinded forward
    (nodes i, i+1, i+2) and falls back to the centred stencil on the last interior node.
    ``d2[j, i]`` is the three-point second derivative.
    """
    n = s.size - 1
    d1 = np.zeros((4, n + 1))
    d2 = np.zeros((3, n + 1))
    hm = np.diff(s)[:-1]
    hp = np.diff(s)[1:]
    idx = np.arange(1, n)
    d2[0, idx] = 2.0 / (hm * (hm + hp))
    d2[1, idx] = -2.0 / (hm * hp)
    d2[2, idx] = 2.0 / (hp * (hm + hp))
    up = np.arange(1, n - 1)
    h1 = s[up + 1] - s[up]
    h2 = s[up + 2] - s[up + 1]
    d1[1, up] = -(2.0 * h1 + h2) / (h1 * (h1 + h2))
    d1[2, up] = (h1 + h2) / (h1 * h2)
    d1[3, up] = -h1 / (h2 * (h1 + h2))
    i = n - 1
    a, b = s[i] - s[i - 1], s[i + 1] - s[i]
    d1[0, i] = -b / (a * (a + b))
    d1[1, i] = (b - a) / (a * b)
    d1[2, i] = a / (b * (a + b))
    return d1, d2


@dataclass(frozen=True)
class EpsDomain:
    """Regularised domain ``0 <= psi <= psi0(y) - 2 eps`` in mapped coordinates."""

    setup: GyreSetup
    eps: float
    n_s: int
    s_nodes: np.ndarray
    clustering: float

    @property
    def y_span(self):
        return (0.0, self.setup.Y)

    def L(self, y):
        return self.setup.psi0(y) - 2.0 * self.eps

    def dL(self, y):
        return self.setup.psi0.d1(y)

    def psi(self, y):
        return float(self.L(y)) * self.s_nodes

    def distance(self, y):
        """``psi0(y) - psi - eps`` at the nodes: equals eps on the right boundary."""
        return float(self.setup.psi0(y)) - self.psi(y) - self.eps


def make_domain(setup: GyreSetup, eps: float, grid: GridConfig = GridConfig()) -> EpsDomain:
    eps = float(eps)
    y = np.linspace(0.0, setup.Y, 1025)
    if not eps > 0.0 or not 2.0 * eps < float(np.min(setup.psi0(y))):
        raise DomainError("need 0 < 2 eps < min psi0")
    return EpsDomain(setup, eps, int(grid.n_s), stretched_nodes(int(grid.n_s), grid.clustering),
                     float(grid.clustering))


@dataclass(frozen=True)
class BoundaryData:
    """Regularised boundary data, with the profile samples it needs evaluated once."""

    setup: GyreSetup
    eps: float
    w_left0: float
    left_rate: float
    w_right0: float
    a0: float

    @classmethod
    def build(cls, profile, setup: GyreSetup, eps: float):
        eps = float(eps)
        top = float(setup.psi0(0.0))
        w_left0 = float(profile.w(eps))
        return cls(setup, eps, w_left0, mu_of(profile, setup, eps) / w_left0,
                   float(profile.w(top - eps)), root_a(setup, 0.0).a)

    def left(self, y):
        """``w0(eps) * exp(mu(eps) y / w0(eps))``."""
        out = self.w_left0 * np.exp(self.left_rate * self.setup.check_y(y))
        return float(out) if np.ndim(y) == 0 else out

    def left_slope(self, y):
        return self.left_rate * self.left(y)

    def right(self, y):
        """``w0(psi0(0) - eps) * a(y)**2 / a(0)**2``."""
        yy = np.atleast_1d(self.setup.check_y(y))
        out = np.array([self.w_right0 * (root_a(self.setup, v).a / self.a0) ** 2 for v in yy])
        return float(out[0]) if np.ndim(y) == 0 else out

    def right_slope(self, y):
        a = root_a(self.setup, y).a
        return self.w_right0 * 2.0 * a * root_a_derivative(self.setup, y) / self.a0 ** 2


def boundary_left(profile, setup: GyreSetup, eps: float, y):
    """Left boundary data of the regularised problem at latitude ``y``."""
    return BoundaryData.build(profile, setup, eps).left(y)


def boundary_right(profile, setup: GyreSetup, eps: float, y):
    """Right boundary data of the regularised problem at latitude ``y``."""
    return BoundaryData.build(profile, setup, eps).right(y)


@dataclass
class MarchState:
    """Accepted level ``w_prev`` (boundaries included) at latitude ``y`` plus cached operators."""

    domain: EpsDomain
    profile: object
    w_prev: np.ndarray
    y: float
    use_numba: bool = _accel.HAVE_NUMBA
    d1: np.ndarray = field(init=False, repr=False)
    d2: np.ndarray = field(init=False, repr=False)
    boundary: BoundaryData = field(init=False, repr=False)

    def __post_init__(self):
        self.d1, self.d2 = difference_stencils(self.domain.s_nodes)
        self.boundary = BoundaryData.build(self.profile, self.setup, self.domain.eps)

    @property
    def setup(self):
        return self.domain.setup

    def coefficients(self, y_next, dy):
        dom, setup = self.domain, self.domain.setup
        L = float(dom.L(y_next))
        nu = float(setup.nu(y_next))
        src = 2.0 * (L * (1.0 - dom.s_nodes) + dom.eps)
        return dict(lam_nu=setup.lambda0 * nu, inv_dy=1.0 / dy, adv=float(dom.dL(y_next)) / L,
                    diff=nu * nu / (L * L), src=src)

    def boundary_values(self, y):
        return self.boundary.left(y), self.boundary.right(y)

    def _assemble(self, w_full, y_next, dy):
        c = self.coefficients(y_next, dy)
        return assemble_step(w_full, self.w_prev, self.domain.s_nodes, self.d1, self.d2, c["lam_nu"],
                             c["inv_dy"], c["adv"], c["diff"], c["src"], use_numba=self.use_numba), c


def _full(state, w_trial, y_next):
    w_trial = np.asarray(w_trial, dtype=float)
    n = state.domain.n_s
    if w_trial.size == n + 1:
        return w_trial.copy()
    if w_trial.size != n - 1:
        raise DomainError("trial state must hold the interior nodes or the full column")
    wl, wr = state.boundary_values(y_next)
    return np.concatenate(([wl], w_trial, [wr]))


def residual(state: MarchState, w_trial, y_next: float, dy: float) -> np.ndarray:
    """Implicit-step residual at the interior nodes.

    ``w_trial`` is either the interior vector or the full column with boundary entries filled.
    """
    w = _full(state, w_trial, y_next)
    if np.any(w[1:-1] <= 0.0):
        raise NonPositiveTrial("trial state must be positive at interior nodes")
    (res, *_), _ = state._assemble(w, y_next, dy)
    return res


@dataclass
class NewtonResult:
    w: np.ndarray  # full column, boundaries included
    iterations: int
    history: list
    min_damping: float

    @property
    def interior(self):
        return self.w[1:-1]


def newton_solve_step(state: MarchState, y_next: float, dy: float, config: StepConfig = StepConfig(),
                      w_start=None) -> NewtonResult:
    """Full Newton on the implicit step with the analytic banded Jacobian and positivity damping."""
    start = state.w_prev[1:-1] if w_start is None else w_start
    w = _full(state, start, y_next)
    if np.any(w[1:-1] <= 0.0):
        raise NonPositiveTrial("Newton start must be positive")
    history = []
    theta_min = 1.0
    tol = None
    for it in range(config.max_iter + 1):
        (res, lo, di, u1, u2), coef = state._assemble(w, y_next, dy)
        if tol is None:
            tol = config.newton_tol * max(1.0, float(np.max(np.abs(coef["src"]))))
        norm = float(np.max(np.abs(res)))
        history.append(norm)
        if not math.isfinite(norm):
            raise NewtonDiverged(f"non-finite residual at y = {y_next:.6g}")
        if norm <= tol:
            return NewtonResult(w, it, history, theta_min)
        if it == config.max_iter:
            break
        delta = solve_band(lo, di, u1, u2, -res, use_numba=state.use_numba)
        if delta is None or not np.all(np.isfinite(delta)):
            raise NewtonDiverged(f"singular Jacobian at y = {y_next:.6g}")
        theta = 1.0
        while True:
            trial = w[1:-1] + theta * delta
            if np.all(trial > 0.0):
                break
            theta *= 0.5
            if theta < config.min_damping:
                raise NonPositiveW(f"positivity lost at minimum damping, y = {y_next:.6g}")
        theta_min = min(theta_min, theta)
        w[1:-1] = trial
    raise NewtonDiverged(f"no convergence in {config.max_iter} iterations at y = {y_next:.6g}, "
                         f"residual {history[-1]:.3e}")


@dataclass
class StepLog:
    y: list = field(default_factory=list)
    dy: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    rejected: int = 0

    def summary(self):
        return {"accepted": len(self.y), "rejected": self.rejected,
                "max_iterations": max(self.iterations, default=0),
                "mean_iterations": float(np.mean(self.iterations)) if self.iterations else 0.0,
                "min_dy": min(self.dy, default=0.0), "max_dy": max(self.dy, default=0.0)}

    def as_array(self):
        return np.column_stack([self.y, self.dy, self.iterations, self.residual])


@dataclass
class DiagnosticCheck:
    name: str
    passed: Optional[bool]  # None for quantities that are reported but not gated
    value: float
    detail: dict = field(default_factory=dict)


@dataclass
class SolutionField:
    """Stored levels of the marched field; ``p``, ``q``, ``r`` are filled by :func:`derivative_diagnostics`."""

    domain: EpsDomain
    profile: object
    y_levels: np.ndarray
    w: np.ndarray
    w_prev: np.ndarray
    dy_prev: np.ndarray
    step_log: StepLog
    meta: dict = field(default_factory=dict)
    p: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    checks: dict = field(default_factory=dict)

    @property
    def setup(self):
        return self.domain.setup

    @property
    def eps(self):
        return self.domain.eps

    @property
    def s(self):
        return self.domain.s_nodes

    def psi_lattice(self):
        return np.array([self.domain.psi(y) for y in self.y_levels])

    def distance_lattice(self):
        return np.array([self.domain.distance(y) for y in self.y_levels])

    def level_index(self, y, tol=1e-12):
        k = int(np.argmin(np.abs(self.y_levels - y)))
        if abs(self.y_levels[k] - y) > tol * max(1.0, self.setup.Y):
            raise DomainError(f"latitude {y} is not a stored level")
        return k

    def with_values(self, w):
        """Copy carrying a replacement lattice (planted defects, external fields)."""
        return SolutionField(self.domain, self.profile, self.y_levels.copy(), np.array(w, dtype=float),
                             self.w_prev.copy(), self.dy_prev.copy(), self.step_log, dict(self.meta))


def output_levels(Y, n_out, extra=()):
    ys = set(np.linspace(0.0, Y, int(n_out) + 1).tolist()) | {float(v) for v in extra}
    ys = sorted(v for v in ys if 0.0 <= v <= Y)
    return np.array(ys)


def initial_column(profile, domain: EpsDomain, boundary_profile=None):
    bprof = profile if boundary_profile is None else boundary_profile
    setup = domain.setup
    w = np.asarray(profile.w(domain.psi(0.0) + domain.eps), dtype=float).copy()
    bdata = BoundaryData.build(bprof, setup, domain.eps)
    w[0] = bdata.left(0.0)
    w[-1] = bdata.right(0.0)
    return w


def march(profile, setup: GyreSetup, eps: float, grid_config: GridConfig = GridConfig(),
          step_config: StepConfig = StepConfig(), *, boundary_profile=None, output_y=(),
          use_numba: Optional[bool] = None) -> SolutionField:
    """March from ``y = 0`` to ``Y`` with adaptive backward-Euler steps.

    The step halves on a Newton failure and doubles after ``grow_after`` consecutive
    accepts (capped at ``dy_max``); steps are clipped to land on every output latitude.
    ``boundary_profile`` supplies the boundary data when it should differ from the
    initial-data profile (comparison studies).
    """
    domain = make_domain(setup, eps, grid_config)
    bprof = profile if boundary_profile is None else boundary_profile
    dy, dy_min, dy_max = step_config.resolved(setup.Y)
    numba_flag = _accel.HAVE_NUMBA if use_numba is None else bool(use_numba and _accel.HAVE_NUMBA)
    w0 = initial_column(profile, domain, boundary_profile)
    if np.any(w0 <= 0.0):
        raise NonPositiveW("initial column is not strictly positive")
    state = MarchState(domain, bprof, w0, 0.0, use_numba=numba_flag)
    targets = output_levels(setup.Y, step_config.n_out, output_y)
    levels, prevs, dys = [w0.copy()], [np.full_like(w0, np.nan)], [np.nan]
    log = StepLog()
    snap = 1e-12 * setup.Y
    y = 0.0
    streak = 0
    for target in targets[1:]:
        while y < target:
            y_next = y + dy
            if y_next >= target - snap:
                y_next = float(target)
            h = y_next - y
            try:
                res = newton_solve_step(state, y_next, h, step_config)
            except (NewtonDiverged, NonPositiveW):
                log.rejected += 1
                streak = 0
                dy = 0.5 * h
                if dy < dy_min:
                    raise StepUnderflow(f"step fell below dy_min = {dy_min:.3g} at y = {y:.6g}") from None
                continue
            log.y.append(y_next)
            log.dy.append(h)
            log.iterations.append(res.iterations)
            log.residual.append(res.history[-1])
            previous = state.w_prev
            state.w_prev = res.w
            state.y = y = y_next
            streak += 1
            if streak >= step_config.grow_after:
                dy = min(2.0 * dy, dy_max)
                streak = 0
        levels.append(state.w_prev.copy())
        prevs.append(previous.copy())
        dys.append(h)
    report = validate(setup)
    meta = {"eps": domain.eps, "n_s": domain.n_s, "clustering": domain.clustering,
            "backend": "numba" if numba_flag else "numpy",
            "hypotheses_ok": report.passed,
            "hypotheses_violated": report.failed_names()}
    return SolutionField(domain, bprof, targets, np.array(levels), np.array(prevs), np.array(dys), log, meta)


def _band_or_none(setup, y, mu):
    try:
        return band_constants(setup, y, mu)
    except Exception:
        return None


def derivative_diagnostics(field: SolutionField, setup: Optional[GyreSetup] = None, mu: float = 0.1,
                           left_fraction: float = 0.1, right_fraction: float = 0.05) -> SolutionField:
    """Fill ``p = dw/dpsi``, ``q = dw/dy`` (fixed psi) and ``r = -q/p`` and attach band checks."""
    setup = field.setup if setup is None else setup
    dom = field.domain
    s = dom.s_nodes
    d1, d2 = difference_stencils(s)
    m, n1 = field.w.shape
    p = np.empty((m, n1))
    q = np.empty((m, n1))
    bdata = BoundaryData.build(field.profile, setup, dom.eps)
    for k, y in enumerate(field.y_levels):
        w = field.w[k]
        psi = dom.psi(y)
        p[k] = np.gradient(w, psi, edge_order=2)
        L = float(dom.L(y))
        adv = float(dom.dL(y)) / L
        dw1 = np.zeros(n1)
        dw1[1:-1] = (d1[0, 1:-1] * w[:-2] + d1[1, 1:-1] * w[1:-1] + d1[2, 1:-1] * w[2:]
                     + d1[3, 1:-1] * np.append(w[3:], 0.0))
        if k == 0 or not np.isfinite(field.dy_prev[k]):
            # first level: the latitude derivative implied by the equation itself
            nu = float(setup.nu(y))
            dw2 = d2[0, 1:-1] * w[:-2] + d2[1, 1:-1] * w[1:-1] + d2[2, 1:-1] * w[2:]
            src = 2.0 * (L * (1.0 - s[1:-1]) + dom.eps)
            q[k, 1:-1] = (nu * nu / (L * L) * np.sqrt(w[1:-1]) * dw2 + src) / (setup.lambda0 * nu)
        else:
            q[k, 1:-1] = (w[1:-1] - field.w_prev[k, 1:-1]) / field.dy_prev[k] - adv * s[1:-1] * dw1[1:-1]
        q[k, 0] = bdata.left_slope(y)
        q[k, -1] = bdata.right_slope(y) - float(dom.dL(y)) * p[k, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(np.abs(p) > 1e-12, -q / p, np.nan)
    field.p, field.q, field.r = p, q, r
    field.checks = _band_checks(field, setup, mu, left_fraction, right_fraction)
    return field


def _band_checks(field, setup, mu, left_fraction, right_fraction):
    s = field.s
    dist = field.distance_lattice()
    left = s <= left_fraction
    right = s >= 1.0 - right_fraction
    checks = {}
    pmin = float(np.min(field.p[:, left]))
    checks["left_p_positive"] = DiagnosticCheck("left_p_positive", pmin > 0.0, pmin,
                                                {"fraction": left_fraction})
    worst_lo, worst_hi, ok = np.inf, np.inf, True
    ratio_range = [np.inf, -np.inf]
    for k, y in enumerate(field.y_levels):
        band = _band_or_none(setup, y, mu)
        ratio = field.p[k, right] / dist[k, right]
        ratio_range = [min(ratio_range[0], ratio.min()), max(ratio_range[1], ratio.max())]
        if band is None:
            ok = False
            continue
        worst_lo = min(worst_lo, float(np.min(ratio + band.e_minus)))
        worst_hi = min(worst_hi, float(np.min(-band.e_plus - ratio)))
    ok = ok and worst_lo > 0.0 and worst_hi > 0.0
    checks["right_p_band"] = DiagnosticCheck(
        "right_p_band", ok, min(worst_lo, worst_hi),
        {"fraction": right_fraction, "mu": mu, "ratio_min": float(ratio_range[0]),
         "ratio_max": float(ratio_range[1]), "margin_lower": worst_lo, "margin_upper": worst_hi})
    qd = np.abs(field.q[:, right]) / dist[:, right]
    checks["right_q_linear"] = DiagnosticCheck("right_q_linear", None, float(np.max(qd)),
                                               {"note": "sup |q|/(psi0-psi-eps) near the right end"})
    slope = setup.psi0.d1(field.y_levels)
    r_end = field.r[:, -1]
    err = float(np.max(np.abs(r_end - slope)))
    tol = max(0.05 * float(np.max(np.abs(slope))), 10.0 * field.eps)
    checks["r_right_boundary"] = DiagnosticCheck("r_right_boundary", err <= tol, err, {"tolerance": tol})
    # quantity bounded in the uniqueness class; no constant is available to compare with
    uq = []
    d1, d2 = difference_stencils(s)
    for k, y in enumerate(field.y_levels):
        w = field.w[k]
        L = float(field.domain.L(y))
        dw2 = (d2[0, 1:-1] * w[:-2] + d2[1, 1:-1] * w[1:-1] + d2[2, 1:-1] * w[2:]) / (L * L)
        uq.append(float(np.max(np.sqrt(w[1:-1]) * np.abs(dw2))))
    checks["sqrt_w_d2w_sup"] = DiagnosticCheck("sqrt_w_d2w_sup", None, max(uq), {})
    checks["p_left_edge_min"] = DiagnosticCheck("p_left_edge_min", bool(np.min(field.p[:, 0]) > 0.0),
                                                float(np.min(field.p[:, 0])), {})
    return checks


def field_difference(fa: SolutionField, fb: SolutionField, points: int = 4001) -> float:
    """Sup-norm gap of two fields over the shared levels and the common domain ``[0, psi0 - 2 max eps]``.

    Each column is resampled with a monotone cubic (PCHIP) interpolant onto a uniform psi grid.
    """
    if fa.y_levels.shape != fb.y_levels.shape or np.max(np.abs(fa.y_levels - fb.y_levels)) > 1e-12:
        raise DomainError("fields must share their output latitudes")
    setup = fa.setup
    gap = 0.0
    for k, y in enumerate(fa.y_levels):
        top = float(setup.psi0(y)) - 2.0 * max(fa.eps, fb.eps)
        psi = np.linspace(0.0, top, int(points))
        ia = PchipInterpolator(fa.domain.psi(y), fa.w[k])(psi)
        ib = PchipInterpolator(fb.domain.psi(y), fb.w[k])(psi)
        gap = max(gap, float(np.max(np.abs(ia - ib))))
    return gap


def grid_difference(coarse: SolutionField, fine: SolutionField) -> float:
    """Sup-norm gap at the coarse nodes; the stretched node sets are nested under doubling."""
    stride, rem = divmod(fine.domain.n_s, coarse.domain.n_s)
    if rem or stride < 1 or coarse.domain.clustering != fine.domain.clustering or coarse.eps != fine.eps:
        raise DomainError("grid comparison needs nested node sets at the same eps")
    return float(np.max(np.abs(coarse.w - fine.w[:, ::stride])))
