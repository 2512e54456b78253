# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: single-asset holding search and Euler path stepping.

Function-for-function twin of ``pure.py``; the backend dispatcher picks
whichever is available.  Arithmetic matches the numpy fallback so the two
backends agree to rounding error.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, log, pow, sqrt

cnp.import_array()

KIND_EXP = 0
KIND_LOG = 1
KIND_POWER = 2

A_CONST = 0
A_AFFINE = 1
B_ZERO = 0
B_CONST = 1
B_LINEAR = 2

DEF _KIND_EXP = 0
DEF _KIND_LOG = 1
DEF _KIND_POWER = 2


cdef double _foc(int kind, double param, double[::1] probs, double[::1] incr,
                 double[::1] base, double theta) nogil:
    cdef Py_ssize_t i, n = probs.shape[0]
    cdef double acc = 0.0, w, m, e
    if kind == _KIND_EXP:
        m = -1e308
        for i in range(n):
            e = -param * (base[i] + theta * incr[i])
            if e > m:
                m = e
        for i in range(n):
            w = base[i] + theta * incr[i]
            acc += probs[i] * incr[i] * exp(-param * w - m)
        return acc
    if kind == _KIND_LOG:
        for i in range(n):
            w = base[i] + theta * incr[i]
            acc += probs[i] * incr[i] / w
        return acc
    for i in range(n):
        w = base[i] + theta * incr[i]
        acc += probs[i] * incr[i] * pow(w, -param)
    return acc


cdef double _foc_slope(int kind, double param, double[::1] probs, double[::1] incr,
                       double[::1] base, double theta) nogil:
    cdef Py_ssize_t i, n = probs.shape[0]
    cdef double acc = 0.0, w, m, e
    if kind == _KIND_EXP:
        m = -1e308
        for i in range(n):
            e = -param * (base[i] + theta * incr[i])
            if e > m:
                m = e
        for i in range(n):
            w = base[i] + theta * incr[i]
            acc += probs[i] * incr[i] * incr[i] * exp(-param * w - m)
        return -param * acc
    if kind == _KIND_LOG:
        for i in range(n):
            w = base[i] + theta * incr[i]
            acc += probs[i] * incr[i] * incr[i] / (w * w)
        return -acc
    for i in range(n):
        w = base[i] + theta * incr[i]
        acc += probs[i] * incr[i] * incr[i] * pow(w, -param - 1.0)
    return -param * acc


def solve_theta_1d(int kind, double param, probs, incr, base):
    """See ``pure.solve_theta_1d``; identical contract."""
    cdef double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[::1] s = np.ascontiguousarray(incr, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(base, dtype=np.float64)
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double lo, hi, flo, fhi, span, step, mid, theta, f, fp, cand
    cdef double smax = 0.0
    cdef bint any_nonzero = False, lo_finite, hi_finite
    cdef int it

    for i in range(n):
        if s[i] != 0.0:
            any_nonzero = True
        if fabs(s[i]) > smax:
            smax = fabs(s[i])
    if not any_nonzero:
        return 0.0

    if kind == _KIND_EXP:
        step = 1.0 / (param * max(1e-12, smax)) + 1.0
        lo = -step
        hi = step
        span = step
        for it in range(200):
            if _foc(kind, param, p, s, b, lo) <= 0.0:
                lo -= span
                span *= 2.0
            else:
                break
        else:
            return float("nan")
        span = step
        for it in range(200):
            if _foc(kind, param, p, s, b, hi) >= 0.0:
                hi += span
                span *= 2.0
            else:
                break
        else:
            return float("nan")
    else:
        flo = -1e308
        fhi = 1e308
        lo_finite = False
        hi_finite = False
        for i in range(n):
            if s[i] > 0.0:
                if -b[i] / s[i] > flo:
                    flo = -b[i] / s[i]
                lo_finite = True
            elif s[i] < 0.0:
                if -b[i] / s[i] < fhi:
                    fhi = -b[i] / s[i]
                hi_finite = True
            elif b[i] <= 0.0:
                return float("nan")
        if lo_finite and hi_finite and not flo < fhi:
            return float("nan")
        span = fhi - flo
        if not isfinite(span):
            span = 2.0 * (1.0 + (fabs(flo) if lo_finite else 0.0)
                          + (fabs(fhi) if hi_finite else 0.0))
        lo = flo + 1e-13 * span if lo_finite else -1.0
        hi = fhi - 1e-13 * span if hi_finite else 1.0
        step = 1.0
        for it in range(200):
            if lo_finite or _foc(kind, param, p, s, b, lo) > 0.0:
                break
            lo -= step
            step *= 2.0
        step = 1.0
        for it in range(200):
            if hi_finite or _foc(kind, param, p, s, b, hi) < 0.0:
                break
            hi += step
            step *= 2.0

    for it in range(110):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _foc(kind, param, p, s, b, mid) > 0.0:
            lo = mid
        else:
            hi = mid

    theta = 0.5 * (lo + hi)
    for it in range(4):
        f = _foc(kind, param, p, s, b, theta)
        fp = _foc_slope(kind, param, p, s, b, theta)
        if fp == 0.0:
            break
        cand = theta - f / fp
        if cand <= lo or cand >= hi:
            break
        theta = cand
    return theta


def euler_terminal(double y0, double t0, double horizon, int n_steps, normals,
                   int a_kind, double a1, double a2,
                   int b_kind, double b1, double b2, double shift):
    """See ``pure.euler_terminal``; identical contract."""
    cdef double[:, ::1] z = np.ascontiguousarray(normals, dtype=np.float64)
    cdef Py_ssize_t n_paths = z.shape[0]
    cdef Py_ssize_t j, k
    cdef double dt = (horizon - t0) / n_steps
    cdef double sdt = sqrt(dt)
    cdef double y, a, drift
    out = np.empty(n_paths, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for j in range(n_paths):
            y = y0
            for k in range(n_steps):
                if a_kind == 0:
                    a = a1
                else:
                    a = a1 + a2 * y
                if b_kind == 0:
                    drift = -shift * a
                elif b_kind == 1:
                    drift = b1 - shift * a
                else:
                    drift = b1 + b2 * y - shift * a
                y = y + dt * drift + (sdt * a) * z[j, k]
            o[j] = y
    return out
