"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles explicit-loop kernels; the numpy backend is
a vectorized fallback with identical semantics. Selection happens once at
import time via the XELINK_BACKEND environment variable:

  auto   (default) numba when importable, else numpy
  numba  require numba, fail loudly if unavailable
  numpy  force the pure-numpy path

`benchmarks/bench_kernels.py` times the two backends against each other.
"""

import os

_REQUESTED = os.environ.get("XELINK_BACKEND", "auto").lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"XELINK_BACKEND must be auto, numba or numpy, got {_REQUESTED!r}"
    )

if _REQUESTED in ("auto", "numba"):
    try:
        from xelink.kernels import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        if _REQUESTED == "numba":
            raise
        from xelink.kernels import numpy_backend as _impl

        BACKEND = "numpy"
else:
    from xelink.kernels import numpy_backend as _impl

    BACKEND = "numpy"

mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
masked_softmax = _impl.masked_softmax
burn_iterate = _impl.burn_iterate
burn_belief_backward = _impl.burn_belief_backward
greedy_forward = _impl.greedy_forward
greedy_backward = _impl.greedy_backward

__all__ = [
    "BACKEND",
    "burn_belief_backward",
    "burn_iterate",
    "greedy_backward",
    "greedy_forward",
    "masked_softmax",
    "mlp_backward",
    "mlp_forward",
]
