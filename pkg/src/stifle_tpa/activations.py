"""The five activation functions compared across the detector variants.

linear(x) = m*x
relu(x) = max(x, 0)
leaky_relu(x) = x for x > 0, a*x otherwise
swish(x) = x * sigmoid(beta * x)
mish(x) = x * tanh(softplus(x))

Softplus is evaluated piecewise (x + log1p(e^-x) above x = 20) because the
naive ln(1 + e^x) overflows in double precision near x = 710. Sigmoid is
split by sign for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import InvalidInterval


class ActivationKind(Enum):
    LINEAR = "linear"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    SWISH = "swish"
    MISH = "mish"


_KIND_CODE = {
    ActivationKind.LINEAR: _kernels.LINEAR,
    ActivationKind.RELU: _kernels.RELU,
    ActivationKind.LEAKY_RELU: _kernels.LEAKY,
    ActivationKind.SWISH: _kernels.SWISH,
    ActivationKind.MISH: _kernels.MISH,
}

_SOFTPLUS_CUTOFF = 20.0


@dataclass(frozen=True)
class ActivationParams:
    """Slope and gate coefficients; defaults follow common convention."""

    m: float = 1.0  # linear slope
    a: float = 0.01  # leaky relu negative-side slope
    beta: float = 1.0  # swish gate coefficient

    def __post_init__(self):
        if not (math.isfinite(self.m) and math.isfinite(self.a) and math.isfinite(self.beta)):
            raise ValueError("activation parameters must be finite")
        if self.a < 0.0:
            raise ValueError(f"leaky slope a must be >= 0, got {self.a}")
        if self.beta < 0.0:
            raise ValueError(f"swish beta must be >= 0, got {self.beta}")


DEFAULT_PARAMS = ActivationParams()


def softplus(x: float) -> float:
    """ln(1 + e^x), stable for large positive x."""
    if x > _SOFTPLUS_CUTOFF:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def sigmoid(z: float) -> float:
    """Logistic function, stable for large |z|."""
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def evaluate(kind: ActivationKind, x: float, params: ActivationParams = DEFAULT_PARAMS) -> float:
    """Evaluate one activation at a finite scalar input."""
    if not math.isfinite(x):
        raise ValueError(f"activation input must be finite, got {x!r}")
    if kind is ActivationKind.LINEAR:
        return params.m * x
    if kind is ActivationKind.RELU:
        return x if x > 0.0 else 0.0
    if kind is ActivationKind.LEAKY_RELU:
        return x if x > 0.0 else params.a * x
    if kind is ActivationKind.SWISH:
        return x * sigmoid(params.beta * x)
    return x * math.tanh(softplus(x))


def mish_derivative(x: float) -> float:
    """Analytic d/dx of mish: tanh(sp(x)) + x * sigmoid(x) * sech^2(sp(x))."""
    sp = softplus(x)
    t = math.tanh(sp)
    return t + x * sigmoid(x) * (1.0 - t * t)


def evaluate_grid(
    kind: ActivationKind, xs: np.ndarray, params: ActivationParams = DEFAULT_PARAMS
) -> np.ndarray:
    """Vectorized evaluation over an array of inputs (kernel-backed)."""
    return _kernels.activation_grid(_KIND_CODE[kind], params.m, params.a, params.beta, xs)


def scan_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """The inclusive evaluation grid lo + i*step used by the scan operations."""
    if not (lo < hi) or step <= 0.0:
        raise InvalidInterval(f"need lo < hi and step > 0, got [{lo}, {hi}] step {step}")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1, dtype=np.float64)


def max_abs_gap(
    kind_a: ActivationKind,
    kind_b: ActivationKind,
    params: ActivationParams = DEFAULT_PARAMS,
    lo: float = -6.0,
    hi: float = 6.0,
    step: float = 1e-3,
) -> tuple[float, float]:
    """Dense-grid maximum of |f_a(x) - f_b(x)| over [lo, hi] and its argmax.

    Returns:
        (gap, x) where the gap is attained; ties keep the first grid point.
    """
    if not (lo < hi) or step <= 0.0:
        raise InvalidInterval(f"need lo < hi and step > 0, got [{lo}, {hi}] step {step}")
    return _kernels.max_gap_scan(
        _KIND_CODE[kind_a], _KIND_CODE[kind_b], params.m, params.a, params.beta, lo, hi, step
    )


def table_rows(lo: float, hi: float, step: float, params: ActivationParams = DEFAULT_PARAMS):
    """Rows (x, linear, relu, leaky, swish, mish) over the inclusive grid."""
    xs = scan_grid(lo, hi, step)
    columns = [
        evaluate_grid(kind, xs, params)
        for kind in (
            ActivationKind.LINEAR,
            ActivationKind.RELU,
            ActivationKind.LEAKY_RELU,
            ActivationKind.SWISH,
            ActivationKind.MISH,
        )
    ]
    for i, x in enumerate(xs):
        yield (float(x), *(float(col[i]) for col in columns))
