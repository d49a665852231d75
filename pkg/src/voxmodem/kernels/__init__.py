"""Hot receiver kernels with a compiled core and a numpy fallback.

Two operations dominate the receiver's runtime: the trellis SISO pass
(forward/backward recursion over code states) and per-symbol soft
demapping over the constellation.  Both exist twice with identical
semantics:

  * ``voxmodem.kernels._core``  - Cython extension (built by setup.py)
  * ``voxmodem.kernels.numpy_backend`` - pure numpy fallback

The compiled core is used when importable; set VOXMODEM_KERNELS=py to
force the fallback or VOXMODEM_KERNELS=c to require the extension.
``benchmarks/bench_kernels.py`` compares the two.

Reduction modes shared by both backends:
  0  max-log (plain max)
  1  max-log with an 8-entry Jacobian correction table,
     corr(d) = log(1 + exp(-d)) tabulated at d = 0.0, 0.5, ..., 3.5
     (floor indexing, zero beyond 4.0)
  2  exact log-sum-exp (oracle/testing)
"""

import os

_requested = os.environ.get("VOXMODEM_KERNELS", "auto")

if _requested not in ("auto", "c", "py"):
    raise ValueError(f"VOXMODEM_KERNELS={_requested!r}: expected auto, c or py")

if _requested in ("auto", "c"):
    try:
        from voxmodem.kernels import _core as _backend

        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        from voxmodem.kernels import numpy_backend as _backend

        BACKEND = "numpy"
else:
    from voxmodem.kernels import numpy_backend as _backend

    BACKEND = "numpy"

bcjr_siso = _backend.bcjr_siso
demap_maxlog = _backend.demap_maxlog

MODE_MAXLOG = 0
MODE_JACOBIAN = 1
MODE_EXACT = 2

__all__ = [
    "bcjr_siso",
    "demap_maxlog",
    "BACKEND",
    "MODE_MAXLOG",
    "MODE_JACOBIAN",
    "MODE_EXACT",
]
