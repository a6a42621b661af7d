"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``OIC_DISABLE_NUMBA=1`` before import to force the numpy path. Both paths
compute the same quantities; tests run them against each other.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("OIC_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        from numba import njit as _njit

        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return wrap


def pick(fast, slow):
    """Return the compiled kernel if enabled, else the numpy fallback."""
    return fast if USE_NUMBA else slow
