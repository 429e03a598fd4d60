"""Kernel backend selection.

Set HWDKIT_BACKEND=numpy to force the pure-numpy path, HWDKIT_BACKEND=numba
to require the jitted path (ImportError if numba is missing). The default
(auto) mixes the faster implementation per op: BLAS-backed im2col wins the
convolutions while the jitted loops win pooling. The choice is fixed at
import time so a process always runs a single backend.
"""

import os
import warnings

_requested = os.environ.get("HWDKIT_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"HWDKIT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested != "numpy":
    try:
        from . import _numba
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba unavailable, falling back to pure-numpy kernels")
        _requested = "numpy"

if _requested == "numpy":
    BACKEND = "numpy"
    from ._numpy import (
        conv2d_forward,
        conv2d_backward,
        maxpool2_forward,
        maxpool2_backward,
    )
elif _requested == "numba":
    BACKEND = "numba"
    from ._numba import (
        conv2d_forward,
        conv2d_backward,
        maxpool2_forward,
        maxpool2_backward,
    )
else:
    BACKEND = "hybrid"
    from ._numba import maxpool2_forward, maxpool2_backward
    from ._numpy import conv2d_forward, conv2d_backward

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
]
