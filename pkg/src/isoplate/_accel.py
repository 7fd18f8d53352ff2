"""Numba switch for the per-cell kernels.

Set ``ISOPLATE_NUMBA=0`` in the environment before importing :mod:`isoplate`
to force the vectorized numpy path. Any other value (or unset) uses numba when
it can be imported.
"""

import os

_flag = os.environ.get("ISOPLATE_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

USE_NUMBA = _numba is not None and _flag not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` in nopython mode when numba is enabled.

    The undecorated function is still reachable as ``func.py_func`` either way,
    so tests can exercise the interpreted version of the same source.
    """
    if _numba is None:
        func.py_func = func
        return func
    return _numba.njit(cache=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
