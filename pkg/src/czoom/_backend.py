"""Kernel backend selection.

The compiled extension is used when it imports; set ``CZOOM_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

if os.environ.get("CZOOM_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.NAME
