"""Selection between numba-compiled kernels and the pure-numpy fallback.

Set ``MULTILSM_DISABLE_NUMBA=1`` before importing :mod:`multilsm` to force the
numpy path (useful for debugging and for the kernel benchmark).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("MULTILSM_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)

_NJIT_KWARGS = {"cache": True, "nogil": True, "fastmath": False}


def njit(func):
    """``numba.njit`` when numba is importable, otherwise the function itself."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(**_NJIT_KWARGS)(func)


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
