"""Optional numba acceleration.

Every hot kernel in the package is decorated with :func:`jit`.  When numba is
importable and ``RWRE_DISABLE_NUMBA`` is unset (or ``0``), kernels are compiled
with ``numba.njit``; otherwise the very same source runs as plain Python on
numpy arrays.  Both paths consume the same counter-based random numbers, so
results agree bit for bit.
"""

from __future__ import annotations

import os

_flag = os.environ.get("RWRE_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def jit(func=None, **kwargs):
    """``numba.njit`` with caching, or the identity when numba is off."""
    if func is None:
        return lambda f: jit(f, **kwargs)
    if not HAS_NUMBA:
        return func
    kwargs.setdefault("cache", True)
    return numba.njit(**kwargs)(func)


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
