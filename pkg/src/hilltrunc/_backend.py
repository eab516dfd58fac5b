"""Kernel backend selection.

The compiled extension is used when it imports; ``HILL_PURE_PYTHON=1``
forces the numpy/scipy fallback.
"""
import os

from . import _pykernels

kernels = _pykernels
BACKEND = "python"

if os.environ.get("HILL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "compiled"


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["compiled"] = _ckernels
    return found
