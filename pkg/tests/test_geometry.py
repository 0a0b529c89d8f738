import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clickmil.geometry import (
    Box,
    Point,
    Polygon,
    box_center,
    euclidean,
    iou,
    max_window_at,
    polygon_bbox_center,
)

boxes = st.builds(
    Box,
    x=st.floats(-100, 100),
    y=st.floats(-100, 100),
    w=st.floats(0.1, 200),
    h=st.floats(0.1, 200),
)


class TestBox:
    def test_rejects_zero_area(self):
        with pytest.raises(ValueError):
            Box(0, 0, 0, 10)
        with pytest.raises(ValueError):
            Box(0, 0, 10, -1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Box(float("nan"), 0, 1, 1)


class TestIou:
    def test_identity(self):
        b = Box(3, 4, 10, 20)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 10, 10), Box(100, 100, 5, 5)) == 0.0

    def test_half_overlap(self):
        # intersection 50, union 150
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 10, 10)) == pytest.approx(1 / 3)

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        assert iou(a, b) == pytest.approx(iou(b, a))
        assert 0.0 <= iou(a, b) <= 1.0

    @given(boxes)
    def test_self_iou_is_one(self, b):
        assert iou(b, b) == pytest.approx(1.0)


class TestBoxCenter:
    @pytest.mark.parametrize(
        "box,expected",
        [
            (Box(0, 0, 10, 10), (5, 5)),
            (Box(2, 4, 6, 8), (5, 8)),
            (Box(0, 0, 1, 1), (0.5, 0.5)),
        ],
    )
    def test_examples(self, box, expected):
        c = box_center(box)
        assert (c.x, c.y) == expected


class TestPolygonBboxCenter:
    def test_square(self):
        p = Polygon((Point(0, 0), Point(10, 0), Point(10, 10), Point(0, 10)))
        box, center = polygon_bbox_center(p)
        assert (box.x, box.y, box.w, box.h) == (0, 0, 10, 10)
        assert (center.x, center.y) == (5, 5)

    def test_l_shape_center_off_mass(self):
        p = Polygon(
            (Point(0, 0), Point(10, 0), Point(10, 4), Point(4, 4), Point(4, 10), Point(0, 10))
        )
        _, center = polygon_bbox_center(p)
        assert (center.x, center.y) == (5, 5)

    def test_triangle(self):
        p = Polygon((Point(0, 0), Point(8, 0), Point(0, 6)))
        box, center = polygon_bbox_center(p)
        assert (box.x, box.y, box.w, box.h) == (0, 0, 8, 6)
        assert (center.x, center.y) == (4, 3)

    def test_rejects_self_intersection(self):
        with pytest.raises(ValueError):
            Polygon((Point(0, 0), Point(10, 10), Point(10, 0), Point(0, 10)))

    @given(
        st.lists(
            st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=3, max_size=8
        )
    )
    def test_matches_minmax_box_center(self, coords):
        import numpy as np

        # build a star-shaped (hence simple) polygon around the centroid
        cx = sum(c[0] for c in coords) / len(coords)
        cy = sum(c[1] for c in coords) / len(coords)
        pts = sorted(coords, key=lambda c: math.atan2(c[1] - cy, c[0] - cx))
        xs = [c[0] for c in pts]
        ys = [c[1] for c in pts]
        if max(xs) - min(xs) < 1e-6 or max(ys) - min(ys) < 1e-6:
            return
        try:
            poly = Polygon(tuple(Point(x, y) for x, y in pts))
        except ValueError:
            return  # collinear duplicates may still self-touch
        _, center = polygon_bbox_center(poly)
        assert center.x == pytest.approx((min(xs) + max(xs)) / 2)
        assert center.y == pytest.approx((min(ys) + max(ys)) / 2)


class TestMaxWindow:
    def test_image_center(self):
        b = max_window_at(Point(50, 30), 100, 60)
        assert (b.x, b.y, b.w, b.h) == (0, 0, 100, 60)

    def test_click_near_left(self):
        b = max_window_at(Point(10, 30), 100, 60)
        assert (b.x, b.y, b.w, b.h) == (0, 0, 20, 60)

    def test_click_near_corner(self):
        b = max_window_at(Point(90, 10), 100, 60)
        assert (b.x, b.y, b.w, b.h) == (80, 0, 20, 20)

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            max_window_at(Point(150, 30), 100, 60)

    @given(st.floats(0.01, 99.99), st.floats(0.01, 59.99))
    def test_centered_contained_maximal(self, x, y):
        b = max_window_at(Point(x, y), 100, 60)
        c = b.center()
        assert abs(c.x - x) < 1e-9 and abs(c.y - y) < 1e-9
        assert b.x >= -1e-9 and b.y >= -1e-9
        assert b.x2 <= 100 + 1e-9 and b.y2 <= 60 + 1e-9
        # per-axis maximality: growing either side exits the image
        assert min(b.x, 100 - b.x2) < 1e-9
        assert min(b.y, 60 - b.y2) < 1e-9


class TestEuclidean:
    def test_examples(self):
        assert euclidean(Point(0, 0), Point(3, 4)) == 5.0
        assert euclidean(Point(7, 7), Point(7, 7)) == 0.0
        assert euclidean(Point(1, 1), Point(2, 2)) == pytest.approx(math.sqrt(2))
