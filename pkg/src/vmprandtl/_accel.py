"""Numba switch.

Kernels are written once as plain loops. They are compiled with ``numba.njit``
unless numba is missing or ``VMPRANDTL_DISABLE_NUMBA`` is set to a truthy value,
in which case callers get vectorised numpy/scipy equivalents instead.
"""

import os

_FLAG = "VMPRANDTL_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


try:
    if _disabled_by_env():
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(func):
    """Compile ``func`` in nopython mode when numba is active, else return it unchanged."""
    if HAVE_NUMBA:
        # fastmath off: the ODE kernel relies on compensated summation
        return numba.njit(cache=True, nogil=True, fastmath=False)(func)
    return func


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
