"""Tibial plateau angle measurement from stifle radiograph landmark detections."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .geometry import (
    CaseLandmarks,
    Line2D,
    Point2D,
    RangeClass,
    RangeThresholds,
    TpaResult,
    angle_between_lines,
    classify,
    compute_tpa,
    ftl,
    mtpl,
    perpendicular_at,
)
from .ingest import (
    ClassRoleMap,
    DetectionRecord,
    ImageMeta,
    LandmarkRole,
    parse_label_file,
    resolve_landmarks,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "CaseLandmarks",
    "Line2D",
    "Point2D",
    "RangeClass",
    "RangeThresholds",
    "TpaResult",
    "angle_between_lines",
    "classify",
    "compute_tpa",
    "ftl",
    "mtpl",
    "perpendicular_at",
    "ClassRoleMap",
    "DetectionRecord",
    "ImageMeta",
    "LandmarkRole",
    "parse_label_file",
    "resolve_landmarks",
    "__version__",
]
