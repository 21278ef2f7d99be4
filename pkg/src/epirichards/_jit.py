"""JIT switch for the hot sampler kernels.

Kernels are written in the numpy subset numba understands, so the same source
runs compiled or as plain numpy. Set ``EPIRICHARDS_DISABLE_NUMBA=1`` to force
the interpreted path (debugging, platforms without numba).
"""

import os

_disabled = os.environ.get("EPIRICHARDS_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    JIT_ENABLED = True
except ImportError:
    _njit = None
    JIT_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        return _njit(func, **kwargs) if func is not None else _njit(**kwargs)
    if func is not None:
        return func

    def wrapper(f):
        return f

    return wrapper
