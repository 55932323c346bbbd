"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built at install time. Set
``PLACESYNTH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
trilinear = _fallback.trilinear

if not os.environ.get("PLACESYNTH_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        trilinear = _ckernels.trilinear
        BACKEND = "cython"

__all__ = ["BACKEND", "trilinear"]
