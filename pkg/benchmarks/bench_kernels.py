"""Compare the numba kernels with the numpy/scipy path.

    python3 benchmarks/bench_kernels.py [--n-s 512] [--repeat 20] [--ode]

The ODE shooting kernel has no vectorised twin; ``--ode`` times it once more in a
subprocess with numba switched off through ``VMPRANDTL_DISABLE_NUMBA``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vmprandtl import _accel
from vmprandtl._kernels import assemble_step, solve_band
from vmprandtl.ode_separable import separable_initial_profile, shoot
from vmprandtl.profiles import benchmark_setup
from vmprandtl.vm_march import GridConfig, MarchState, march, make_domain, initial_column


def _step_inputs(n_s):
    setup = benchmark_setup()
    profile = separable_initial_profile(2.5, 1.0)
    dom = make_domain(setup, 1e-3, GridConfig(n_s))
    state = MarchState(dom, profile, initial_column(profile, dom), 0.0)
    c = state.coefficients(1e-3, 1e-3)
    args = (state.w_prev, state.w_prev, dom.s_nodes, state.d1, state.d2, c["lam_nu"], c["inv_dy"],
            c["adv"], c["diff"], c["src"])
    return setup, profile, args


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-s", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--ode", action="store_true")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare")
        return 1
    setup, profile, step = _step_inputs(args.n_s)
    bands = assemble_step(*step, use_numba=True)
    rhs = -bands[0]
    x_nb = solve_band(*bands[1:], rhs, use_numba=True)
    x_np = solve_band(*bands[1:], rhs, use_numba=False)
    print(f"banded solve agreement: {np.max(np.abs(x_nb - x_np)):.2e}")

    rows = []
    for name, fn in (("assemble", lambda u: assemble_step(*step, use_numba=u)),
                     ("solve", lambda u: solve_band(*bands[1:], rhs, use_numba=u))):
        fn(True)
        t_nb = _best(lambda: fn(True), args.repeat, 200)
        t_np = _best(lambda: fn(False), args.repeat, 200)
        rows.append((name, t_nb, t_np))
    march(profile, setup, 1e-3, GridConfig(args.n_s), use_numba=True)
    t_nb = _best(lambda: march(profile, setup, 1e-3, GridConfig(args.n_s), use_numba=True), 3, 1)
    t_np = _best(lambda: march(profile, setup, 1e-3, GridConfig(args.n_s), use_numba=False), 3, 1)
    rows.append(("march", t_nb, t_np))
    if args.ode:
        shoot(2.5)
        t_nb = _best(lambda: shoot(2.5), 3, 1)
        env = dict(os.environ, VMPRANDTL_DISABLE_NUMBA="1")
        code = ("import timeit; from vmprandtl.ode_separable import shoot; "
                "print(min(timeit.repeat(lambda: shoot(2.5), repeat=1, number=1)))")
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        rows.append(("shoot (python)", t_nb, float(out.stdout.strip())))

    print(f"{'kernel':<16}{'numba [s]':>14}{'numpy [s]':>14}{'speedup':>10}")
    for name, a, b in rows:
        print(f"{name:<16}{a:>14.3e}{b:>14.3e}{b / a:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
