"""Pure Python kernel implementations.

Fallback used when the compiled extension is unavailable. Formulas and
evaluation order match _core.pyx exactly so both backends agree to within
floating point rounding.
"""

import math

import numpy as np

LINEAR = 0
RELU = 1
LEAKY = 2
SWISH = 3
MISH = 4

_SOFTPLUS_CUTOFF = 20.0


def _activation(kind, m, a, beta, x):
    if kind == LINEAR:
        return m * x
    if kind == RELU:
        return x if x > 0.0 else 0.0
    if kind == LEAKY:
        return x if x > 0.0 else a * x
    if kind == SWISH:
        z = beta * x
        if z >= 0.0:
            s = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            s = e / (1.0 + e)
        return x * s
    if kind == MISH:
        if x > _SOFTPLUS_CUTOFF:
            sp = x + math.log1p(math.exp(-x))
        else:
            sp = math.log1p(math.exp(x))
        return x * math.tanh(sp)
    raise ValueError(f"unknown activation kind code {kind}")


def activation_grid(kind, m, a, beta, xs):
    """Evaluate one activation over an array of inputs."""
    xs_list = [float(v) for v in xs]
    out = [_activation(kind, m, a, beta, x) for x in xs_list]
    return np.asarray(out, dtype=np.float64)


def max_gap_scan(kind_a, kind_b, m, a, beta, lo, hi, step):
    """Max |f_a(x) - f_b(x)| over the inclusive grid lo + i*step, i = 0..n.

    n = floor((hi - lo) / step + 1e-9), so hi is included when it lands on
    the grid. Returns (gap, x at which it occurs).
    """
    n = int(math.floor((hi - lo) / step + 1e-9))
    best = -1.0
    best_x = lo
    for i in range(n + 1):
        x = lo + i * step
        g = abs(_activation(kind_a, m, a, beta, x) - _activation(kind_b, m, a, beta, x))
        if g > best:
            best = g
            best_x = x
    return best, best_x


def tpa_batch(ex, ey, tx, ty, ax, ay, bx, by):
    """Plateau angles (degrees) for arrays of landmark coordinates.

    Inputs are the eminence, talus and the two plateau points, one case per
    index. Cases whose defining points coincide exactly yield NaN.
    """
    ex = [float(v) for v in ex]
    ey = [float(v) for v in ey]
    tx = [float(v) for v in tx]
    ty = [float(v) for v in ty]
    ax = [float(v) for v in ax]
    ay = [float(v) for v in ay]
    bx = [float(v) for v in bx]
    by = [float(v) for v in by]
    n = len(ex)
    out = [0.0] * n
    for i in range(n):
        ux = tx[i] - ex[i]
        uy = ty[i] - ey[i]
        vx = bx[i] - ax[i]
        vy = by[i] - ay[i]
        nu = math.hypot(ux, uy)
        nv = math.hypot(vx, vy)
        if nu == 0.0 or nv == 0.0:
            out[i] = math.nan
            continue
        ux /= nu
        uy /= nu
        vx /= nv
        vy /= nv
        dot = ux * vx + uy * vy
        cross = ux * vy - uy * vx
        # angle(perpendicular(FTL), MTPL): dot/cross swap roles
        out[i] = math.degrees(math.atan2(abs(dot), abs(cross)))
    return np.asarray(out, dtype=np.float64)
