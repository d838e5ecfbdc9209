import os
import subprocess
import sys

import numpy as np
import pytest

from vmprandtl import _accel
from vmprandtl._kernels import assemble_step, solve_band
from vmprandtl.vm_march import GridConfig, MarchState, initial_column, make_domain, march

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba path is disabled")


@pytest.fixture(scope="module")
def step_args(bench_setup, sep_profile):
    dom = make_domain(bench_setup, 1e-3, GridConfig(256))
    state = MarchState(dom, sep_profile, initial_column(sep_profile, dom), 0.0)
    c = state.coefficients(1e-3, 1e-3)
    w = state.w_prev * (1.0 + 0.01 * np.sin(7.0 * dom.s_nodes))
    return (w, state.w_prev, dom.s_nodes, state.d1, state.d2, c["lam_nu"], c["inv_dy"], c["adv"],
            c["diff"], c["src"])


@needs_numba
def test_assemble_parity(step_args):
    fast = assemble_step(*step_args, use_numba=True)
    slow = assemble_step(*step_args, use_numba=False)
    for a, b in zip(fast, slow):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(b)))


@needs_numba
def test_band_solve_parity(step_args, rng):
    _, lo, di, u1, u2 = assemble_step(*step_args, use_numba=False)
    rhs = rng.standard_normal(di.size)
    x_fast = solve_band(lo, di, u1, u2, rhs, use_numba=True)
    x_slow = solve_band(lo, di, u1, u2, rhs, use_numba=False)
    assert np.allclose(x_fast, x_slow, rtol=1e-10, atol=1e-12)
    # residual of the banded product
    n = di.size
    A = np.diag(di) + np.diag(lo[1:], -1) + np.diag(u1[:-1], 1) + np.diag(u2[:-2], 2)
    assert np.max(np.abs(A @ x_fast - rhs)) <= 1e-9 * np.max(np.abs(rhs)) * n


@needs_numba
def test_march_parity(bench_setup, sep_profile):
    fast = march(sep_profile, bench_setup, 1e-3, GridConfig(128), use_numba=True)
    slow = march(sep_profile, bench_setup, 1e-3, GridConfig(128), use_numba=False)
    assert fast.meta["backend"] == "numba" and slow.meta["backend"] == "numpy"
    assert np.allclose(fast.w, slow.w, rtol=1e-10, atol=0.0)


def test_env_flag_disables_numba():
    env = dict(os.environ, VMPRANDTL_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from vmprandtl import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
