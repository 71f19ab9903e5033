"""Pick the compiled kernels when available.

Set ``REMOTE_STABILITY_PURE_PYTHON=1`` to force the pure-Python kernels.
"""
import os

from . import _pykernels

if os.environ.get("REMOTE_STABILITY_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"
