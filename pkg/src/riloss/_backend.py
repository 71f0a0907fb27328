"""Selects the compute backend for the hot O(n^2) loops.

Set ``RILOSS_DISABLE_NUMBA=1`` to force the pure-numpy path. When numba is
not installed the numpy path is used regardless.
"""
from __future__ import annotations

import contextlib
import os
from types import ModuleType

from . import _np_kernels

ENV_FLAG = "RILOSS_DISABLE_NUMBA"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def get(name: str) -> ModuleType:
    if name == "numpy":
        return _np_kernels
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not installed")
        from . import _nb_kernels

        return _nb_kernels
    raise ValueError(f"unknown backend {name!r}")


_active: ModuleType = get("numba") if HAVE_NUMBA and _numba_requested() else _np_kernels


def ops() -> ModuleType:
    return _active


def name() -> str:
    return "numba" if _active is not _np_kernels else "numpy"


@contextlib.contextmanager
def use(backend: str):
    """Temporarily switch backends (benchmarks and equivalence tests)."""
    global _active
    prev = _active
    _active = get(backend)
    try:
        yield _active
    finally:
        _active = prev
