"""Backend selection for the hot loops.

The compiled module is used when it was built; otherwise the numpy
versions are. Set ``LATTICEFRONTS_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

COMPETITION = 0
COOPERATIVE = 1

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("LATTICEFRONTS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

rhs = _impl.rhs
dp5_step = _impl.dp5_step
window_extrema = _impl.window_extrema
linear_recurrence = _impl.linear_recurrence


def backends():
    """Map of available backend name -> module (for benchmarks and tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        return out
    out["cython"] = compiled
    return out
