# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Mirrors _pure.py operation for operation; the two backends must stay
formula-identical so results agree to floating point rounding.
"""

from libc.math cimport atan2, exp, fabs, floor, hypot, log1p, tanh, NAN

import numpy as np

LINEAR = 0
RELU = 1
LEAKY = 2
SWISH = 3
MISH = 4

cdef double _SOFTPLUS_CUTOFF = 20.0
cdef double _RAD2DEG = 57.29577951308232087679815481410517


cdef inline double _activation(int kind, double m, double a, double beta, double x) nogil:
    cdef double z, e, s, sp
    if kind == 0:  # linear
        return m * x
    if kind == 1:  # relu
        return x if x > 0.0 else 0.0
    if kind == 2:  # leaky relu
        return x if x > 0.0 else a * x
    if kind == 3:  # swish
        z = beta * x
        if z >= 0.0:
            s = 1.0 / (1.0 + exp(-z))
        else:
            e = exp(z)
            s = e / (1.0 + e)
        return x * s
    # mish
    if x > _SOFTPLUS_CUTOFF:
        sp = x + log1p(exp(-x))
    else:
        sp = log1p(exp(x))
    return x * tanh(sp)


def activation_grid(int kind, double m, double a, double beta, xs):
    """Evaluate one activation over an array of inputs."""
    if kind < 0 or kind > 4:
        raise ValueError(f"unknown activation kind code {kind}")
    cdef double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _activation(kind, m, a, beta, xv[i])
    return out


def max_gap_scan(int kind_a, int kind_b, double m, double a, double beta,
                 double lo, double hi, double step):
    """Max |f_a(x) - f_b(x)| over the inclusive grid lo + i*step, i = 0..n.

    n = floor((hi - lo) / step + 1e-9), so hi is included when it lands on
    the grid. Returns (gap, x at which it occurs).
    """
    if kind_a < 0 or kind_a > 4 or kind_b < 0 or kind_b > 4:
        raise ValueError("unknown activation kind code")
    cdef long n = <long>floor((hi - lo) / step + 1e-9)
    cdef double best = -1.0
    cdef double best_x = lo
    cdef double x, g
    cdef long i
    with nogil:
        for i in range(n + 1):
            x = lo + i * step
            g = fabs(_activation(kind_a, m, a, beta, x)
                     - _activation(kind_b, m, a, beta, x))
            if g > best:
                best = g
                best_x = x
    return best, best_x


def tpa_batch(ex, ey, tx, ty, ax, ay, bx, by):
    """Plateau angles (degrees) for arrays of landmark coordinates.

    Inputs are the eminence, talus and the two plateau points, one case per
    index. Cases whose defining points coincide exactly yield NaN.
    """
    cdef double[::1] exv = np.ascontiguousarray(ex, dtype=np.float64)
    cdef double[::1] eyv = np.ascontiguousarray(ey, dtype=np.float64)
    cdef double[::1] txv = np.ascontiguousarray(tx, dtype=np.float64)
    cdef double[::1] tyv = np.ascontiguousarray(ty, dtype=np.float64)
    cdef double[::1] axv = np.ascontiguousarray(ax, dtype=np.float64)
    cdef double[::1] ayv = np.ascontiguousarray(ay, dtype=np.float64)
    cdef double[::1] bxv = np.ascontiguousarray(bx, dtype=np.float64)
    cdef double[::1] byv = np.ascontiguousarray(by, dtype=np.float64)
    cdef Py_ssize_t n = exv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double ux, uy, vx, vy, nu, nv, dot, cross
    with nogil:
        for i in range(n):
            ux = txv[i] - exv[i]
            uy = tyv[i] - eyv[i]
            vx = bxv[i] - axv[i]
            vy = byv[i] - ayv[i]
            nu = hypot(ux, uy)
            nv = hypot(vx, vy)
            if nu == 0.0 or nv == 0.0:
                ov[i] = NAN
                continue
            ux /= nu
            uy /= nu
            vx /= nv
            vy /= nv
            dot = ux * vx + uy * vy
            cross = ux * vy - uy * vx
            # angle(perpendicular(FTL), MTPL): dot/cross swap roles
            ov[i] = atan2(fabs(dot), fabs(cross)) * _RAD2DEG
    return out
