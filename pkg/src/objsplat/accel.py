"""Numba acceleration switch.

Hot kernels are written as plain Python loops and compiled with numba's
``@njit`` unless the environment variable ``OBJSPLAT_NO_NUMBA`` is set to a
truthy value (or numba is missing), in which case the identical pure-Python
code runs uncompiled.  Both paths execute the same statements, so results
agree bitwise.
"""

import os


def _numba_enabled() -> bool:
    flag = os.environ.get("OBJSPLAT_NO_NUMBA", "0").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_enabled()


def maybe_njit(func):
    """Compile ``func`` with numba when enabled, otherwise return it as-is."""
    if USE_NUMBA:
        from numba import njit

        return njit(cache=True)(func)
    return func
