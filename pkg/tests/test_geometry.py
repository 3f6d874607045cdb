import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stifle_tpa.errors import DegenerateGeometry, InvalidThresholds
from stifle_tpa.geometry import (
    CaseLandmarks,
    Line2D,
    Point2D,
    RangeClass,
    RangeThresholds,
    angle_between_lines,
    classify,
    compute_tpa,
    degeneracy_epsilon,
    ftl,
    line_through,
    mtpl,
    perpendicular_at,
)

from conftest import landmarks_20deg


def lm(e, t, p1, p2):
    return CaseLandmarks(
        intercondylar_eminence=Point2D(*e),
        talus_center=Point2D(*t),
        mtpl_p1=Point2D(*p1),
        mtpl_p2=Point2D(*p2),
    )


class TestPoint:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Point2D(float("nan"), 0.0)
        with pytest.raises(ValueError):
            Point2D(0.0, float("inf"))

    def test_distance(self):
        assert Point2D(0, 0).distance_to(Point2D(3, 4)) == 5.0


class TestLine:
    def test_requires_unit_direction(self):
        with pytest.raises(ValueError):
            Line2D(anchor=Point2D(0, 0), direction=(1.0, 1.0))

    def test_accepts_unit(self):
        Line2D(anchor=Point2D(0, 0), direction=(0.6, 0.8))


class TestFtl:
    def test_axis_aligned(self):
        line = ftl(lm((0, 0), (0, 100), (-1, 0), (1, 0)))
        assert line.anchor == Point2D(0, 0)
        assert line.direction == (0.0, 1.0)

    def test_coincident_points(self):
        with pytest.raises(DegenerateGeometry):
            ftl(lm((3, 4), (3, 4), (-1, 0), (1, 0)))

    def test_normalization(self):
        line = ftl(lm((0, 0), (30, 40), (-1, 0), (1, 0)))
        assert line.direction == pytest.approx((0.6, 0.8), abs=1e-15)


class TestMtpl:
    def test_horizontal(self):
        line = mtpl(lm((0, 0), (0, 100), (-10, 0), (10, 0)))
        assert line.anchor == Point2D(-10, 0)
        assert line.direction == (1.0, 0.0)

    def test_coincident(self):
        with pytest.raises(DegenerateGeometry):
            mtpl(lm((0, 0), (0, 100), (0, 0), (0, 0)))

    def test_twenty_degree_slope(self):
        line = mtpl(lm((0, 0), (0, 100), (-9.397, -3.420), (9.397, 3.420)))
        expected = (math.cos(math.radians(20)), math.sin(math.radians(20)))
        assert line.direction == pytest.approx(expected, abs=1e-3)


class TestPerpendicular:
    def test_vertical_to_horizontal(self):
        base = Line2D(anchor=Point2D(0, 0), direction=(0.0, 1.0))
        perp = perpendicular_at(base, Point2D(5, 5))
        assert perp.anchor == Point2D(5, 5)
        assert abs(perp.direction[0]) == 1.0 and perp.direction[1] == 0.0

    def test_horizontal_to_vertical(self):
        base = Line2D(anchor=Point2D(0, 0), direction=(1.0, 0.0))
        perp = perpendicular_at(base, Point2D(0, 0))
        assert perp.direction[0] == 0.0 and abs(perp.direction[1]) == 1.0

    def test_rotation(self):
        base = Line2D(anchor=Point2D(0, 0), direction=(0.6, 0.8))
        perp = perpendicular_at(base, Point2D(1, 2))
        assert perp.direction == pytest.approx((-0.8, 0.6), abs=1e-15)

    def test_exactly_orthogonal(self):
        base = Line2D(anchor=Point2D(0, 0), direction=(0.6, 0.8))
        perp = perpendicular_at(base, Point2D(0, 0))
        dot = base.direction[0] * perp.direction[0] + base.direction[1] * perp.direction[1]
        assert abs(dot) < 1e-12


class TestAngleBetween:
    def test_orthogonal(self):
        a = Line2D(Point2D(0, 0), (0.0, 1.0))
        b = Line2D(Point2D(0, 0), (1.0, 0.0))
        assert angle_between_lines(a, b) == 90.0

    def test_antiparallel_is_same_line(self):
        a = Line2D(Point2D(0, 0), (0.0, 1.0))
        b = Line2D(Point2D(0, 0), (0.0, -1.0))
        assert angle_between_lines(a, b) == 0.0

    def test_seventy_degrees(self):
        a = Line2D(Point2D(0, 0), (0.0, 1.0))
        b = Line2D(Point2D(0, 0), (math.cos(math.radians(20)), math.sin(math.radians(20))))
        assert angle_between_lines(a, b) == pytest.approx(70.0, abs=1e-9)


class TestComputeTpa:
    def test_plateau_perpendicular_to_axis(self):
        result = compute_tpa(lm((0, 0), (0, 100), (-10, 0), (10, 0)))
        assert result.angle_deg == pytest.approx(0.0, abs=1e-12)
        assert result.range_class is RangeClass.BELOW_RANGE

    def test_parallel_lines_give_ninety(self):
        result = compute_tpa(lm((0, 0), (0, 100), (5, 0), (5, 10)))
        assert result.angle_deg == pytest.approx(90.0, abs=1e-12)
        assert result.parallel_warning
        assert result.range_class is RangeClass.ABOVE_RANGE

    def test_twenty_degree_case(self):
        result = compute_tpa(landmarks_20deg())
        assert result.angle_deg == pytest.approx(20.0, abs=1e-9)
        assert result.range_class is RangeClass.NORMAL
        assert not result.parallel_warning

    def test_lines_returned_for_rendering(self):
        result = compute_tpa(landmarks_20deg())
        assert result.ftl.anchor == Point2D(400.0, 200.0)
        assert result.mtpl.anchor == Point2D(300.0, 380.0)
        assert result.perpendicular.anchor == Point2D(400.0, 200.0)

    def test_degenerate_propagates(self):
        with pytest.raises(DegenerateGeometry):
            compute_tpa(lm((1, 1), (1, 1), (0, 0), (1, 0)))


class TestClassify:
    @pytest.mark.parametrize(
        "angle,expected",
        [
            (20.537, RangeClass.NORMAL),
            (10.4, RangeClass.BELOW_RANGE),
            (6.53, RangeClass.BELOW_RANGE),
            (17.354, RangeClass.BELOW_RANGE),
            (18.0, RangeClass.NORMAL),
            (25.0, RangeClass.NORMAL),
            (25.001, RangeClass.ABOVE_RANGE),
            (0.0, RangeClass.BELOW_RANGE),
            (90.0, RangeClass.ABOVE_RANGE),
        ],
    )
    def test_default_thresholds(self, angle, expected):
        assert classify(angle) is expected

    def test_custom_thresholds(self):
        th = RangeThresholds(lower=5.0, upper=30.0)
        assert classify(10.4, th) is RangeClass.NORMAL

    @pytest.mark.parametrize("lower,upper", [(25.0, 18.0), (18.0, 18.0), (-1.0, 25.0), (18.0, 95.0)])
    def test_invalid_thresholds(self, lower, upper):
        with pytest.raises(InvalidThresholds):
            RangeThresholds(lower=lower, upper=upper)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            classify(float("nan"))


class TestDegeneracyEpsilon:
    def test_scale_relative(self):
        # 1e-7 px apart: coincident on a 1000 px image, distinct at default scale
        diag = math.hypot(1000, 1000)
        points = lm((0, 0), (0, 1e-7), (-1, 0), (1, 0))
        with pytest.raises(DegenerateGeometry):
            ftl(points, eps=degeneracy_epsilon(diag))
        ftl(points)  # default epsilon 1e-9

    def test_small_diagonal_floor(self):
        assert degeneracy_epsilon(0.5) == degeneracy_epsilon(1.0)


finite_coord = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def separated_landmarks(ex, ey, tx, ty, ax, ay, bx, by):
    if math.hypot(tx - ex, ty - ey) < 1e-3 or math.hypot(bx - ax, by - ay) < 1e-3:
        return None
    return lm((ex, ey), (tx, ty), (ax, ay), (bx, by))


class TestProperties:
    @given(*(finite_coord,) * 8)
    @settings(max_examples=200)
    def test_angle_in_range_and_equivalence(self, ex, ey, tx, ty, ax, ay, bx, by):
        landmarks = separated_landmarks(ex, ey, tx, ty, ax, ay, bx, by)
        if landmarks is None:
            return
        ftl_line = ftl(landmarks)
        mtpl_line = mtpl(landmarks)
        direct = angle_between_lines(ftl_line, mtpl_line)
        assert 0.0 <= direct <= 90.0
        via_perp = angle_between_lines(
            perpendicular_at(ftl_line, landmarks.intercondylar_eminence), mtpl_line
        )
        assert abs((90.0 - direct) - via_perp) < 1e-9

    @given(*(finite_coord,) * 8)
    @settings(max_examples=200)
    def test_swap_invariance(self, ex, ey, tx, ty, ax, ay, bx, by):
        landmarks = separated_landmarks(ex, ey, tx, ty, ax, ay, bx, by)
        if landmarks is None:
            return
        base = compute_tpa(landmarks).angle_deg
        swapped_mtpl = CaseLandmarks(
            intercondylar_eminence=landmarks.intercondylar_eminence,
            talus_center=landmarks.talus_center,
            mtpl_p1=landmarks.mtpl_p2,
            mtpl_p2=landmarks.mtpl_p1,
        )
        swapped_ftl = CaseLandmarks(
            intercondylar_eminence=landmarks.talus_center,
            talus_center=landmarks.intercondylar_eminence,
            mtpl_p1=landmarks.mtpl_p1,
            mtpl_p2=landmarks.mtpl_p2,
        )
        # flipping either direction leaves |dot| and |cross| bit-identical
        assert compute_tpa(swapped_mtpl).angle_deg == base
        assert compute_tpa(swapped_ftl).angle_deg == base

    def test_rigid_transform_invariance(self):
        rng = np.random.default_rng(1234)
        for _ in range(200):
            pts = rng.uniform(-500, 500, (4, 2))
            if (
                math.hypot(*(pts[1] - pts[0])) < 1e-3
                or math.hypot(*(pts[3] - pts[2])) < 1e-3
            ):
                continue
            base = compute_tpa(lm(*pts)).angle_deg
            angle = rng.uniform(0, 2 * math.pi)
            scale = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
            t = rng.uniform(-1e4, 1e4, 2)
            reflect = rng.integers(0, 2)
            c, s = math.cos(angle), math.sin(angle)
            rot = np.array([[c, -s], [s, c]])
            if reflect:
                rot = rot @ np.array([[1.0, 0.0], [0.0, -1.0]])
            moved = (pts @ rot.T) * scale + t
            assert compute_tpa(lm(*moved)).angle_deg == pytest.approx(base, abs=1e-6)
