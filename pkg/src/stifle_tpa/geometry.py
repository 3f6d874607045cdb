"""Tibial plateau angle construction from resolved landmarks.

The measurement builds three lines in pixel space (y grows downward):

* the functional tibial line (FTL) from the centre of the intercondylar
  eminences to the centre of the talus,
* the medial tibial plateau line (MTPL) through its two annotated points,
* the perpendicular to the FTL through the eminence point.

The tibial plateau angle is the acute angle between the perpendicular and
the MTPL, reported unsigned in [0, 90] degrees. Only undirected inter-line
angles are used, so the result is independent of the raster y-down
convention and of any rigid transform of the landmark set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateGeometry, InvalidThresholds

#: scale factor for the coincidence test; the effective epsilon is
#: DEGENERACY_EPS_SCALE * max(1, image diagonal in pixels)
DEGENERACY_EPS_SCALE = 1e-9

#: inter-line angles below this (degrees) flag the FTL and MTPL as parallel
PARALLEL_WARNING_EPS_DEG = 1e-9


def degeneracy_epsilon(image_diagonal_px: float | None = None) -> float:
    """Coincidence threshold in pixels, scale-relative to the image diagonal."""
    if image_diagonal_px is None:
        return DEGENERACY_EPS_SCALE
    return DEGENERACY_EPS_SCALE * max(1.0, image_diagonal_px)


@dataclass(frozen=True)
class Point2D:
    """A point in image pixel coordinates (y increases downward)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class Line2D:
    """An infinite line: anchor point plus unit direction vector."""

    anchor: Point2D
    direction: tuple[float, float]

    def __post_init__(self):
        dx, dy = self.direction
        if not (math.isfinite(dx) and math.isfinite(dy)):
            raise ValueError("line direction must be finite")
        norm = math.hypot(dx, dy)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"line direction must be a unit vector, |d| = {norm!r}")


@dataclass(frozen=True)
class CaseLandmarks:
    """The resolved landmark roles for one radiograph.

    The four required points define the measurement; the stifle and tarsus
    joint centres are carried through for rendering when detected.
    """

    intercondylar_eminence: Point2D
    talus_center: Point2D
    mtpl_p1: Point2D
    mtpl_p2: Point2D
    stifle_joint: Point2D | None = None
    tarsus_joint: Point2D | None = None


class RangeClass(Enum):
    BELOW_RANGE = "BelowRange"
    NORMAL = "Normal"
    ABOVE_RANGE = "AboveRange"


@dataclass(frozen=True)
class RangeThresholds:
    """Inclusive normal range for the plateau angle, in degrees."""

    lower: float = 18.0
    upper: float = 25.0

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise InvalidThresholds(f"thresholds must be finite, got [{self.lower}, {self.upper}]")
        if self.lower >= self.upper:
            raise InvalidThresholds(f"lower must be < upper, got [{self.lower}, {self.upper}]")
        if self.lower < 0.0 or self.upper > 90.0:
            raise InvalidThresholds(f"thresholds must lie in [0, 90], got [{self.lower}, {self.upper}]")


DEFAULT_THRESHOLDS = RangeThresholds()


@dataclass(frozen=True)
class TpaResult:
    """Computed angle with its range class and the constructed lines."""

    angle_deg: float
    range_class: RangeClass
    ftl: Line2D
    mtpl: Line2D
    perpendicular: Line2D
    #: set when the MTPL is (numerically) parallel to the FTL; the 90 degree
    #: angle is still a valid output but almost certainly an annotation error
    parallel_warning: bool = False


def line_through(p: Point2D, q: Point2D, eps: float | None = None) -> Line2D:
    """Line through two points, anchored at ``p``, direction from ``p`` to ``q``.

    Raises:
        DegenerateGeometry: if the points coincide within the epsilon.
    """
    if eps is None:
        eps = degeneracy_epsilon()
    dx = q.x - p.x
    dy = q.y - p.y
    norm = math.hypot(dx, dy)
    if norm < eps:
        raise DegenerateGeometry(
            f"defining points coincide within epsilon {eps!r}: ({p.x}, {p.y}) vs ({q.x}, {q.y})"
        )
    return Line2D(anchor=p, direction=(dx / norm, dy / norm))


def ftl(landmarks: CaseLandmarks, eps: float | None = None) -> Line2D:
    """Functional tibial line: eminence centre toward the talus centre."""
    return line_through(landmarks.intercondylar_eminence, landmarks.talus_center, eps)


def mtpl(landmarks: CaseLandmarks, eps: float | None = None) -> Line2D:
    """Medial tibial plateau line through its two annotated points."""
    return line_through(landmarks.mtpl_p1, landmarks.mtpl_p2, eps)


def perpendicular_at(line: Line2D, at: Point2D) -> Line2D:
    """The line through ``at`` perpendicular to ``line`` (direction rotated +90)."""
    dx, dy = line.direction
    return Line2D(anchor=at, direction=(-dy, dx))


def angle_between_lines(a: Line2D, b: Line2D) -> float:
    """Acute angle between two undirected lines, in degrees within [0, 90].

    Computed as atan2(|cross|, |dot|) of the unit directions, which is
    mathematically identical to acos of the clamped |dot| but remains fully
    conditioned near 0 and 90 degrees. Symmetric in its arguments and
    invariant under flipping either direction vector.
    """
    ax, ay = a.direction
    bx, by = b.direction
    dot = ax * bx + ay * by
    cross = ax * by - ay * bx
    return math.degrees(math.atan2(abs(cross), abs(dot)))


def classify(angle_deg: float, thresholds: RangeThresholds = DEFAULT_THRESHOLDS) -> RangeClass:
    """Range class of an angle against inclusive [lower, upper] thresholds."""
    if math.isnan(angle_deg):
        raise ValueError("cannot classify NaN angle")
    if angle_deg < thresholds.lower:
        return RangeClass.BELOW_RANGE
    if angle_deg > thresholds.upper:
        return RangeClass.ABOVE_RANGE
    return RangeClass.NORMAL


def compute_tpa(
    landmarks: CaseLandmarks,
    thresholds: RangeThresholds = DEFAULT_THRESHOLDS,
    eps: float | None = None,
) -> TpaResult:
    """Full measurement: construct FTL, MTPL and perpendicular, return the angle.

    The angle is the acute angle between the perpendicular (drawn through the
    eminence point) and the MTPL; equivalently 90 degrees minus the acute
    angle between FTL and MTPL.

    Raises:
        DegenerateGeometry: when either line's defining points coincide.
    """
    ftl_line = ftl(landmarks, eps)
    mtpl_line = mtpl(landmarks, eps)
    perp = perpendicular_at(ftl_line, landmarks.intercondylar_eminence)
    angle = angle_between_lines(perp, mtpl_line)
    warning = (90.0 - angle) < PARALLEL_WARNING_EPS_DEG
    return TpaResult(
        angle_deg=angle,
        range_class=classify(angle, thresholds),
        ftl=ftl_line,
        mtpl=mtpl_line,
        perpendicular=perp,
        parallel_warning=warning,
    )
