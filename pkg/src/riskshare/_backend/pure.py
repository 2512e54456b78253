"""Numpy reference implementations of the hot kernels.

Two scalar-heavy inner loops dominate the solvers' runtime: the
single-asset optimal-holding search (a monotone first-order condition
solved thousands of times per bisection chain) and Euler path stepping for
the diffusion model.  A compiled twin of this module lives in
``_fastcore.pyx``; both expose the same functions and are selected at
import time by ``riskshare._backend``.
"""

import numpy as np

KIND_EXP = 0
KIND_LOG = 1
KIND_POWER = 2

A_CONST = 0
A_AFFINE = 1
B_ZERO = 0
B_CONST = 1
B_LINEAR = 2


def _foc(kind: int, param: float, probs, incr, base, theta: float) -> float:
    """Derivative of expected utility w.r.t. the holding, with stable scaling.

    The returned value has the sign of the true derivative; for the
    exponential family it is rescaled by exp(-max exponent) to avoid
    overflow, which leaves the root unchanged.
    """
    w = base + theta * incr
    if kind == KIND_EXP:
        e = -param * w
        e -= e.max()
        return float(np.dot(probs * incr, np.exp(e)))
    if kind == KIND_LOG:
        return float(np.dot(probs * incr, 1.0 / w))
    return float(np.dot(probs * incr, np.power(w, -param)))


def _foc_slope(kind: int, param: float, probs, incr, base, theta: float) -> float:
    w = base + theta * incr
    if kind == KIND_EXP:
        e = -param * w
        e -= e.max()
        return float(-param * np.dot(probs * incr * incr, np.exp(e)))
    if kind == KIND_LOG:
        return float(-np.dot(probs * incr * incr, 1.0 / w ** 2))
    return float(-param * np.dot(probs * incr * incr, np.power(w, -param - 1.0)))


def feasible_theta_interval(incr, base):
    """Open interval of holdings keeping statewise wealth positive.

    Returns (lo, hi); lo >= hi signals an empty interval.  States with zero
    increment constrain feasibility only through their fixed wealth.
    """
    lo, hi = -np.inf, np.inf
    for s, b in zip(incr, base):
        if s > 0.0:
            lo = max(lo, -b / s)
        elif s < 0.0:
            hi = min(hi, -b / s)
        elif b <= 0.0:
            return 1.0, -1.0
    return lo, hi


def solve_theta_1d(kind: int, param: float, probs, incr, base) -> float:
    """Root of the holding first-order condition for a single risky asset.

    ``base`` is the per-state wealth excluding the traded position (initial
    wealth plus claim payoff).  The FOC is strictly decreasing in theta, so
    a bracketing bisection with a Newton polish is exact and unconditionally
    stable.  Returns NaN when no feasible holding exists (positive-wealth
    utilities only).
    """
    probs = np.asarray(probs, dtype=float)
    incr = np.asarray(incr, dtype=float)
    base = np.asarray(base, dtype=float)

    if not np.any(incr != 0.0):
        return 0.0

    if kind == KIND_EXP:
        scale = 1.0 / (param * max(1e-12, np.abs(incr).max())) + 1.0
        lo, hi = -scale, scale
        step = scale
        for _ in range(200):
            if _foc(kind, param, probs, incr, base, lo) <= 0.0:
                lo -= step
                step *= 2.0
            else:
                break
        else:
            return np.nan
        step = scale
        for _ in range(200):
            if _foc(kind, param, probs, incr, base, hi) >= 0.0:
                hi += step
                step *= 2.0
            else:
                break
        else:
            return np.nan
    else:
        flo, fhi = feasible_theta_interval(incr, base)
        if not flo < fhi:
            return np.nan
        # shrink to the open interval; the FOC diverges at the edges
        span = fhi - flo
        if not np.isfinite(span):
            span = 2.0 * (1.0 + abs(flo if np.isfinite(flo) else 0.0)
                          + abs(fhi if np.isfinite(fhi) else 0.0))
        lo = flo + 1e-13 * span if np.isfinite(flo) else -1.0
        hi = fhi - 1e-13 * span if np.isfinite(fhi) else 1.0
        step = 1.0
        for _ in range(200):
            if np.isfinite(flo) or _foc(kind, param, probs, incr, base, lo) > 0.0:
                break
            lo -= step
            step *= 2.0
        step = 1.0
        for _ in range(200):
            if np.isfinite(fhi) or _foc(kind, param, probs, incr, base, hi) < 0.0:
                break
            hi += step
            step *= 2.0

    for _ in range(110):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _foc(kind, param, probs, incr, base, mid) > 0.0:
            lo = mid
        else:
            hi = mid

    theta = 0.5 * (lo + hi)
    for _ in range(4):
        f = _foc(kind, param, probs, incr, base, theta)
        fp = _foc_slope(kind, param, probs, incr, base, theta)
        if fp == 0.0:
            break
        step = f / fp
        cand = theta - step
        if cand <= lo or cand >= hi:
            break
        theta = cand
    return theta


def euler_terminal(y0: float, t0: float, horizon: float, n_steps: int, normals,
                   a_kind: int, a1: float, a2: float,
                   b_kind: int, b1: float, b2: float, shift: float):
    """Terminal values of Euler paths of dY = (b(Y) - shift*a(Y)) dt + a(Y) dW.

    ``normals`` has shape (n_paths, n_steps); each row drives one path.
    The arithmetic is written to match the compiled kernel exactly.
    """
    normals = np.asarray(normals, dtype=float)
    n_paths = normals.shape[0]
    dt = (horizon - t0) / n_steps
    sdt = np.sqrt(dt)
    y = np.full(n_paths, float(y0))
    for k in range(n_steps):
        if a_kind == A_CONST:
            a = a1
        else:
            a = a1 + a2 * y
        if b_kind == B_ZERO:
            drift = -shift * a
        elif b_kind == B_CONST:
            drift = b1 - shift * a
        else:
            drift = b1 + b2 * y - shift * a
        y = y + dt * drift + (sdt * a) * normals[:, k]
    return y
