"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``DIVPUT_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback is used.
"""

from __future__ import annotations

import os

from . import _fallback


def _load():
    if os.environ.get("DIVPUT_PURE_PYTHON", "") not in ("", "0"):
        return _fallback, "python"
    try:
        from . import _kernels
    except ImportError:
        return _fallback, "python"
    return _kernels, "cython"


_impl, BACKEND = _load()

psor = _impl.psor
tree_backward = _impl.tree_backward


def backend(name: str):
    """Kernel module by name (``"cython"`` or ``"python"``), for benchmarks and tests."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
