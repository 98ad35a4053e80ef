"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the numpy module
is the fallback. ``SLE_BACKEND`` overrides: ``auto`` (default), ``compiled``
(fail if the extension is missing), or ``numpy``.
"""

import os

from . import numpy_kernels

_requested = os.environ.get("SLE_BACKEND", "auto")
if _requested not in ("auto", "compiled", "numpy"):
    raise RuntimeError(f"SLE_BACKEND must be auto|compiled|numpy, got {_requested!r}")

kernels = numpy_kernels
if _requested in ("auto", "compiled"):
    try:
        from . import _kernels

        kernels = _kernels
    except ImportError:
        if _requested == "compiled":
            raise


def use(name):
    """Swap the active kernel set ('compiled' or 'numpy'). Returns the previous name."""
    global kernels
    prev = kernels.NAME
    if name == "numpy":
        kernels = numpy_kernels
    elif name == "compiled":
        from . import _kernels

        kernels = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev
