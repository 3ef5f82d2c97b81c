"""Kernel backend selection.

The compiled Cython extension is preferred; set ``WAVEMARG_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` names the active choice.
"""
import os

from . import _pykernels

if os.environ.get("WAVEMARG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

realloc_sweep = _impl.realloc_sweep
grad_sq_sum = _impl.grad_sq_sum


def available_backends():
    """Map backend name to module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
