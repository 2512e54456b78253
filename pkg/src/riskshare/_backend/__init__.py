"""Kernel backend selection.

The compiled extension is preferred when present; the numpy twin is used
otherwise.  Set RISKSHARE_PURE=1 to force the fallback (used by the
benchmark and the backend-parity tests).
"""

import os

from . import pure

KIND_EXP = pure.KIND_EXP
KIND_LOG = pure.KIND_LOG
KIND_POWER = pure.KIND_POWER
A_CONST = pure.A_CONST
A_AFFINE = pure.A_AFFINE
B_ZERO = pure.B_ZERO
B_CONST = pure.B_CONST
B_LINEAR = pure.B_LINEAR

if os.environ.get("RISKSHARE_PURE"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _fastcore as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

solve_theta_1d = _impl.solve_theta_1d
euler_terminal = _impl.euler_terminal
feasible_theta_interval = pure.feasible_theta_interval
