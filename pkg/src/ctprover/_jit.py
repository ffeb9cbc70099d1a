"""Optional numba acceleration.

Set ``CTPROVER_NUMBA=0`` to force the pure-numpy kernels even when numba
is installed.
"""

from __future__ import annotations

import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def _have_numba() -> bool:
    if os.environ.get("CTPROVER_NUMBA", "1").strip().lower() in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _have_numba()

if HAVE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit
