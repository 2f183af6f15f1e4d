"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
numpy fallback is always available. Override with QUATNN_BACKEND=numpy or
QUATNN_BACKEND=native (the latter raises if the extension is missing).
"""
from __future__ import annotations

import os

from . import np_kernels

_requested = os.environ.get("QUATNN_BACKEND", "auto")

if _requested not in ("auto", "native", "numpy"):
    raise ValueError(f"QUATNN_BACKEND must be auto|native|numpy, got {_requested!r}")

active = np_kernels
if _requested in ("auto", "native"):
    try:
        from . import native_kernels

        active = native_kernels
    except ImportError:
        if _requested == "native":
            raise


def backend_name() -> str:
    return active.name
