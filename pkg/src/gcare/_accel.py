"""Optional numba acceleration.

The integration kernels are written in a numba-compatible subset of numpy.
When numba is importable and ``GCARE_DISABLE_NUMBA`` is unset (or ``0``),
they are compiled with ``@njit``; otherwise the same source runs as plain
numpy.
"""

import os

_FLAG = os.environ.get("GCARE_DISABLE_NUMBA", "0").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    USE_NUMBA = True
except ImportError:
    _njit = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, a transparent decorator otherwise."""
    if USE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(f):
        return f

    return wrapper


def python_version_of(func):
    """Return the uncompiled function behind a kernel (itself if not jitted)."""
    return getattr(func, "py_func", func)
