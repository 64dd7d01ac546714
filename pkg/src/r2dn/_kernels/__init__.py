"""Kernel backend selection.

The compiled Cython extension is preferred; a pure-numpy implementation with
identical semantics is used when the extension is unavailable. `BACKEND`
records which one was selected, and both are importable for side-by-side
benchmarking.
"""

from . import python as python_backend

ACT_RELU = python_backend.ACT_RELU
ACT_TANH = python_backend.ACT_TANH

try:
    from . import _sweep as compiled_backend

    BACKEND = "cython"
    equilibrium_sweep = compiled_backend.equilibrium_sweep
    sweep_backward = compiled_backend.sweep_backward
except ImportError:  # pragma: no cover - build-env dependent
    compiled_backend = None
    BACKEND = "python"
    equilibrium_sweep = python_backend.equilibrium_sweep
    sweep_backward = python_backend.sweep_backward

__all__ = [
    "ACT_RELU",
    "ACT_TANH",
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "equilibrium_sweep",
    "sweep_backward",
]
