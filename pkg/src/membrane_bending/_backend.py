"""Kernel backend selection.

Hot loops exist twice: as numba ``@njit`` kernels and as vectorized numpy
code.  ``MEMBRANE_BENDING_BACKEND=numpy`` forces the numpy path; otherwise
numba is used whenever it imports.
"""
from __future__ import annotations

import os

_requested = os.environ.get("MEMBRANE_BENDING_BACKEND", "numba").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _requested != "numpy"


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    kwargs.setdefault("cache", True)
    if _numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
