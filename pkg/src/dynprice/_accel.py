"""Backend selection for the hot simulation kernels.

Numba is used when importable unless ``DYNPRICE_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorized numpy path runs instead.
"""

from __future__ import annotations

import os

_FLAG = "DYNPRICE_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if numba_disabled():
        raise ImportError(_FLAG)
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def default_backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
