"""Backend selection for the hot kernels.

Every hot kernel exists twice: a scalar-loop version compiled with numba
and a vectorized numpy version.  ``OUTAGE_LAB_BACKEND`` picks the default
(``numba`` or ``numpy``); individual calls may override it with
``backend=``.  When numba cannot be imported the numpy path is used.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def default_backend() -> str:
    name = os.environ.get("OUTAGE_LAB_BACKEND", "numba").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"OUTAGE_LAB_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)
