"""Kernel backend selection.

Two interchangeable implementations of the hot loops exist:
``_kernels_numba`` (jitted, default when numba is importable) and
``_kernels_numpy`` (pure numpy fallback).  The environment variable
``TEXTDEBIAS_BACKEND`` picks one: "numba", "numpy", or "auto" (default).
Callers may also pass an explicit name, which wins over the environment.
"""

from __future__ import annotations

import os
from types import ModuleType

ENV_VAR = "TEXTDEBIAS_BACKEND"
_CHOICES = ("auto", "numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name(override: str | None = None) -> str:
    """Resolve the active backend name ("numba" or "numpy")."""
    name = (override or os.environ.get(ENV_VAR, "auto")).strip().lower()
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}; expected one of {_CHOICES}")
    if name == "auto":
        return "numba" if _numba_available() else "numpy"
    if name == "numba" and not _numba_available():
        raise RuntimeError("backend 'numba' requested but numba is not importable")
    return name


def kernels(override: str | None = None) -> ModuleType:
    """Return the kernel module for the resolved backend."""
    if backend_name(override) == "numba":
        from . import _kernels_numba as mod
    else:
        from . import _kernels_numpy as mod
    return mod
