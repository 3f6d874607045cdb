"""Numeric kernels with a compiled core and a pure Python fallback.

The backend is chosen once at import time:

* ``STIFLE_TPA_BACKEND=native`` requires the compiled extension (ImportError
  if it is missing),
* ``STIFLE_TPA_BACKEND=pure`` forces the Python fallback,
* unset or ``auto`` prefers the extension and falls back silently.

``BACKEND`` names the implementation in use. Both backends expose the same
functions with identical semantics; see benchmarks/bench_kernels.py for the
speed comparison.
"""

import os

_requested = os.environ.get("STIFLE_TPA_BACKEND", "auto").lower()

if _requested not in ("auto", "native", "pure"):
    raise ValueError(
        f"STIFLE_TPA_BACKEND must be 'auto', 'native' or 'pure', got {_requested!r}"
    )

if _requested == "pure":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        from . import _pure as _impl

        BACKEND = "pure"

LINEAR = _impl.LINEAR
RELU = _impl.RELU
LEAKY = _impl.LEAKY
SWISH = _impl.SWISH
MISH = _impl.MISH

activation_grid = _impl.activation_grid
max_gap_scan = _impl.max_gap_scan
tpa_batch = _impl.tpa_batch

__all__ = [
    "BACKEND",
    "LINEAR",
    "RELU",
    "LEAKY",
    "SWISH",
    "MISH",
    "activation_grid",
    "max_gap_scan",
    "tpa_batch",
]
