"""Kernel backend selection.

Hot loops run through the numba-compiled kernels by default. Set
``SOM_BACKEND=numpy`` to force the pure-numpy fallback, or ``SOM_BACKEND=numba``
to fail loudly if the compiled path is unavailable. Selection happens once at
import; :func:`resolve` lets callers (e.g. the benchmark runner) pick a
specific backend per call.
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")


def _load(name: str):
    if name == "numpy":
        from . import kernels_numpy
        return kernels_numpy
    from . import kernels_numba
    return kernels_numba


_requested = os.environ.get("SOM_BACKEND", "auto").strip().lower()
if _requested not in _CHOICES:
    raise RuntimeError(f"SOM_BACKEND must be one of {_CHOICES}, got {_requested!r}")

if _requested == "numpy":
    _active = _load("numpy")
elif _requested == "numba":
    _active = _load("numba")
else:
    try:
        _active = _load("numba")
    except ImportError:
        _active = _load("numpy")


def active():
    """The kernel module selected at import time."""
    return _active


def backend_name() -> str:
    return _active.NAME


def resolve(name: str | None = None):
    """Return a kernel module by name; None or 'auto' means the active one."""
    if name is None or name == "auto":
        return _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r} (expected numba or numpy)")
    return _load(name)
