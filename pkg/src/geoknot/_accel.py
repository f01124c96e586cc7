"""JIT switch for the numeric kernels.

Kernels are plain Python functions written against numpy scalars and arrays.
When numba is importable and ``GEOKNOT_NUMBA`` is not ``0`` they are compiled
with ``numba.njit``; otherwise the undecorated function runs as-is. Both paths
consume random numbers identically, so trajectories agree bit-for-bit.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENV_FLAG = "GEOKNOT_NUMBA"


def numba_enabled():
    return numba is not None and os.environ.get(ENV_FLAG, "1") != "0"


ENABLED = numba_enabled()


def jit(func=None, **kwargs):
    """``numba.njit`` with caching, or the identity when JIT is disabled."""
    if func is None:
        return lambda f: jit(f, **kwargs)
    if not ENABLED:
        return func
    kwargs.setdefault("cache", True)
    return numba.njit(**kwargs)(func)
