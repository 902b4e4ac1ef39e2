"""Backend selection for the hot kernels.

Set ``BDCHAIN_DISABLE_JIT=1`` to force the pure-numpy code paths even when
numba is importable.
"""

import os

_DISABLED = os.environ.get("BDCHAIN_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by BDCHAIN_DISABLE_JIT")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` or the identity when disabled."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func
