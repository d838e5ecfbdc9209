"""Hot loops.

Each kernel is a plain loop compiled by numba when available. The march assembly and
the banded solve also have vectorised numpy/scipy twins, selected through
:func:`assemble_step` and :func:`solve_band`. The ODE integrator is inherently
sequential, so without numba it simply runs as interpreted Python.
"""

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import HAVE_NUMBA, njit

ODE_OK = 0
ODE_BLOWUP = 1
ODE_DIVERGED = 2
ODE_MAXSTEPS = 3


@njit
def _ode_rhs(k, f0, f1, f2):
    return f1, f2, k * (f1 * f1 - f0 * f2) + f0 - 1.0


@njit
def dopri5_third_order(k, shoot, xi_end, tol, max_step, diverge_cap, blowup_cap, max_steps):
    """Dormand-Prince 5(4) for ``phi''' = k(phi'^2 - phi phi'') + phi - 1`` from ``(0, 0, shoot)``.

    State and abscissa updates use compensated summation: the growing mode amplifies
    rounding, so plain accumulation limits accuracy to about 1e-8 over twenty units.
    Returns ``(xi, state, status)``. Status is OK, BLOWUP (``|phi| > blowup_cap``),
    DIVERGED (``|1 - phi| > diverge_cap``, only when ``diverge_cap > 0``) or MAXSTEPS.
    """
    xs = np.empty(max_steps + 1)
    zs = np.empty((max_steps + 1, 3))
    y0 = 0.0
    y1 = 0.0
    y2 = shoot
    c0 = 0.0
    c1 = 0.0
    c2 = 0.0
    x = 0.0
    cx = 0.0
    h = min(1e-3, max_step, xi_end)
    i = 0
    xs[0] = 0.0
    zs[0, 0] = y0
    zs[0, 1] = y1
    zs[0, 2] = y2
    status = ODE_MAXSTEPS
    p0, p1, p2 = _ode_rhs(k, y0, y1, y2)
    while i < max_steps:
        if x >= xi_end:
            status = ODE_OK
            break
        last = False
        if x + h >= xi_end:
            h = xi_end - x
            last = True
        q0, q1, q2 = _ode_rhs(k, y0 + h * (p0 / 5.0), y1 + h * (p1 / 5.0), y2 + h * (p2 / 5.0))
        r0, r1, r2 = _ode_rhs(k, y0 + h * (3.0 / 40.0 * p0 + 9.0 / 40.0 * q0),
                              y1 + h * (3.0 / 40.0 * p1 + 9.0 / 40.0 * q1),
                              y2 + h * (3.0 / 40.0 * p2 + 9.0 / 40.0 * q2))
        s0, s1, s2 = _ode_rhs(k, y0 + h * (44.0 / 45.0 * p0 - 56.0 / 15.0 * q0 + 32.0 / 9.0 * r0),
                              y1 + h * (44.0 / 45.0 * p1 - 56.0 / 15.0 * q1 + 32.0 / 9.0 * r1),
                              y2 + h * (44.0 / 45.0 * p2 - 56.0 / 15.0 * q2 + 32.0 / 9.0 * r2))
        t0, t1, t2 = _ode_rhs(
            k,
            y0 + h * (19372.0 / 6561.0 * p0 - 25360.0 / 2187.0 * q0 + 64448.0 / 6561.0 * r0 - 212.0 / 729.0 * s0),
            y1 + h * (19372.0 / 6561.0 * p1 - 25360.0 / 2187.0 * q1 + 64448.0 / 6561.0 * r1 - 212.0 / 729.0 * s1),
            y2 + h * (19372.0 / 6561.0 * p2 - 25360.0 / 2187.0 * q2 + 64448.0 / 6561.0 * r2 - 212.0 / 729.0 * s2))
        u0, u1, u2 = _ode_rhs(
            k,
            y0 + h * (9017.0 / 3168.0 * p0 - 355.0 / 33.0 * q0 + 46732.0 / 5247.0 * r0 + 49.0 / 176.0 * s0
                      - 5103.0 / 18656.0 * t0),
            y1 + h * (9017.0 / 3168.0 * p1 - 355.0 / 33.0 * q1 + 46732.0 / 5247.0 * r1 + 49.0 / 176.0 * s1
                      - 5103.0 / 18656.0 * t1),
            y2 + h * (9017.0 / 3168.0 * p2 - 355.0 / 33.0 * q2 + 46732.0 / 5247.0 * r2 + 49.0 / 176.0 * s2
                      - 5103.0 / 18656.0 * t2))
        d0 = h * (35.0 / 384.0 * p0 + 500.0 / 1113.0 * r0 + 125.0 / 192.0 * s0 - 2187.0 / 6784.0 * t0 + 11.0 / 84.0 * u0)
        d1 = h * (35.0 / 384.0 * p1 + 500.0 / 1113.0 * r1 + 125.0 / 192.0 * s1 - 2187.0 / 6784.0 * t1 + 11.0 / 84.0 * u1)
        d2 = h * (35.0 / 384.0 * p2 + 500.0 / 1113.0 * r2 + 125.0 / 192.0 * s2 - 2187.0 / 6784.0 * t2 + 11.0 / 84.0 * u2)
        n0 = y0 + d0
        n1 = y1 + d1
        n2 = y2 + d2
        v0, v1, v2 = _ode_rhs(k, n0, n1, n2)
        e0 = h * (71.0 / 57600.0 * p0 - 71.0 / 16695.0 * r0 + 71.0 / 1920.0 * s0 - 17253.0 / 339200.0 * t0
                  + 22.0 / 525.0 * u0 - 1.0 / 40.0 * v0)
        e1 = h * (71.0 / 57600.0 * p1 - 71.0 / 16695.0 * r1 + 71.0 / 1920.0 * s1 - 17253.0 / 339200.0 * t1
                  + 22.0 / 525.0 * u1 - 1.0 / 40.0 * v1)
        e2 = h * (71.0 / 57600.0 * p2 - 71.0 / 16695.0 * r2 + 71.0 / 1920.0 * s2 - 17253.0 / 339200.0 * t2
                  + 22.0 / 525.0 * u2 - 1.0 / 40.0 * v2)
        w0 = e0 / (tol * (1.0 + max(abs(y0), abs(n0))))
        w1 = e1 / (tol * (1.0 + max(abs(y1), abs(n1))))
        w2 = e2 / (tol * (1.0 + max(abs(y2), abs(n2))))
        err = math.sqrt((w0 * w0 + w1 * w1 + w2 * w2) / 3.0)
        if err <= 1.0:
            z = d0 - c0
            t = y0 + z
            c0 = (t - y0) - z
            y0 = t
            z = d1 - c1
            t = y1 + z
            c1 = (t - y1) - z
            y1 = t
            z = d2 - c2
            t = y2 + z
            c2 = (t - y2) - z
            y2 = t
            if last:
                x = xi_end
            else:
                z = h - cx
                t = x + z
                cx = (t - x) - z
                x = t
            i += 1
            xs[i] = x
            zs[i, 0] = y0
            zs[i, 1] = y1
            zs[i, 2] = y2
            p0, p1, p2 = v0, v1, v2
            if abs(y0) > blowup_cap:
                status = ODE_BLOWUP
                break
            if diverge_cap > 0.0 and abs(1.0 - y0) > diverge_cap:
                status = ODE_DIVERGED
                break
        if err > 0.0:
            fac = 0.9 * err ** -0.2
        else:
            fac = 5.0
        h = h * min(5.0, max(0.2, fac))
        if h > max_step:
            h = max_step
    if status == ODE_MAXSTEPS and x >= xi_end:
        status = ODE_OK
    return xs[: i + 1], zs[: i + 1], status


# ---------------------------------------------------------------------------
# implicit march step: residual and banded Jacobian
#
# Row i (interior node) has Jacobian entries at columns i-1, i, i+1, i+2: the
# diffusion stencil is three-point and the upwind advection stencil reaches i+2.


@njit
def _assemble_loop(w, wp, s, d1, d2, lam_nu, inv_dy, adv, diff, src, res, lo, di, u1, u2):
    n = w.shape[0] - 1
    for i in range(1, n):
        wi = w[i]
        sq = math.sqrt(wi)
        dw1 = d1[0, i] * w[i - 1] + d1[1, i] * wi + d1[2, i] * w[i + 1]
        if i + 2 <= n:
            dw1 += d1[3, i] * w[i + 2]
        dw2 = d2[0, i] * w[i - 1] + d2[1, i] * wi + d2[2, i] * w[i + 1]
        a = adv * s[i]
        res[i - 1] = lam_nu * ((wi - wp[i]) * inv_dy - a * dw1) - diff * sq * dw2 - src[i]
        lo[i - 1] = -lam_nu * a * d1[0, i] - diff * sq * d2[0, i]
        di[i - 1] = lam_nu * (inv_dy - a * d1[1, i]) - diff * (sq * d2[1, i] + dw2 / (2.0 * sq))
        u1[i - 1] = -lam_nu * a * d1[2, i] - diff * sq * d2[2, i]
        u2[i - 1] = -lam_nu * a * d1[3, i]


def _assemble_numpy(w, wp, s, d1, d2, lam_nu, inv_dy, adv, diff, src, res, lo, di, u1, u2):
    wm, wi, wq = w[:-2], w[1:-1], w[2:]
    wqq = np.append(w[3:], 0.0)
    sl = slice(1, -1)
    sq = np.sqrt(wi)
    dw1 = d1[0, sl] * wm + d1[1, sl] * wi + d1[2, sl] * wq + d1[3, sl] * wqq
    dw2 = d2[0, sl] * wm + d2[1, sl] * wi + d2[2, sl] * wq
    a = adv * s[sl]
    res[:] = lam_nu * ((wi - wp[sl]) * inv_dy - a * dw1) - diff * sq * dw2 - src[sl]
    lo[:] = -lam_nu * a * d1[0, sl] - diff * sq * d2[0, sl]
    di[:] = lam_nu * (inv_dy - a * d1[1, sl]) - diff * (sq * d2[1, sl] + dw2 / (2.0 * sq))
    u1[:] = -lam_nu * a * d1[2, sl] - diff * sq * d2[2, sl]
    u2[:] = -lam_nu * a * d1[3, sl]


def assemble_step(w, wp, s, d1, d2, lam_nu, inv_dy, adv, diff, src, use_numba=HAVE_NUMBA):
    """Residual of the implicit step at every interior node plus its four Jacobian bands.

    ``lo[r]`` couples row r to column r-1; ``u1``/``u2`` to columns r+1/r+2.
    """
    m = w.shape[0] - 2
    res = np.empty(m)
    lo = np.empty(m)
    di = np.empty(m)
    u1 = np.empty(m)
    u2 = np.empty(m)
    kernel = _assemble_loop if use_numba else _assemble_numpy
    kernel(w, wp, s, d1, d2, lam_nu, inv_dy, adv, diff, src, res, lo, di, u1, u2)
    return res, lo, di, u1, u2


@njit
def _band_lu_solve(lo, di, u1, u2, rhs):
    # Gaussian elimination with partial pivoting on one sub / two super diagonals.
    # Row r is stored as columns r-1 .. r+3; row swaps fill at most one extra super diagonal.
    m = di.shape[0]
    a = np.zeros((m, 5))
    b = rhs.copy()
    for r in range(m):
        a[r, 0] = lo[r]
        a[r, 1] = di[r]
        a[r, 2] = u1[r]
        a[r, 3] = u2[r]
    for k in range(m - 1):
        if abs(a[k + 1, 0]) > abs(a[k, 1]):
            for j in range(4):
                tmp = a[k, j + 1]
                a[k, j + 1] = a[k + 1, j]
                a[k + 1, j] = tmp
            tmp = b[k]
            b[k] = b[k + 1]
            b[k + 1] = tmp
        piv = a[k, 1]
        if piv == 0.0:
            return b, False
        f = a[k + 1, 0] / piv
        a[k + 1, 0] = 0.0
        for j in range(1, 4):
            a[k + 1, j] -= f * a[k, j + 1]
        b[k + 1] -= f * b[k]
    if a[m - 1, 1] == 0.0:
        return b, False
    x = np.empty(m)
    for r in range(m - 1, -1, -1):
        acc = b[r]
        for j in range(2, 5):
            c = r + j - 1
            if c < m:
                acc -= a[r, j] * x[c]
        x[r] = acc / a[r, 1]
    return x, True


def solve_band(lo, di, u1, u2, rhs, use_numba=HAVE_NUMBA):
    """Solve the (1, 2)-banded system; returns ``None`` for a singular matrix."""
    if use_numba:
        x, ok = _band_lu_solve(lo, di, u1, u2, rhs)
        return x if ok else None
    m = di.shape[0]
    ab = np.zeros((4, m))
    ab[0, 2:] = u2[:-2]
    ab[1, 1:] = u1[:-1]
    ab[2, :] = di
    ab[3, :-1] = lo[1:]
    try:
        return solve_banded((1, 2), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return None
