"""Pixel-space primitives: points, axis-aligned boxes, simple polygons.

All coordinates are continuous pixels with the origin at the top-left
corner and y growing downward, matching screen/click coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("box parameters must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive extent, got w={self.w}, h={self.h}")

    def center(self) -> Point:
        return Point(self.x + self.w / 2.0, self.y + self.h / 2.0)

    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given as an ordered vertex list."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if not _is_simple(self.vertices):
            raise ValueError("polygon must be simple (non-self-intersecting)")
        box, _ = polygon_bbox_center(self)
        if box.area() <= 0:
            raise ValueError("polygon bounding box must have positive area")


def _segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    """Proper intersection test for open segments ab and cd."""

    def orient(p: Point, q: Point, r: Point) -> float:
        return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def _is_simple(vertices: tuple[Point, ...]) -> bool:
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            # skip adjacent edges, they share an endpoint
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = vertices[j], vertices[(j + 1) % n]
            if _segments_cross(a, b, c, d):
                return False
    return True


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return min(1.0, inter / (a.area() + b.area() - inter))


def box_center(b: Box) -> Point:
    return b.center()


def polygon_bbox_center(p: Polygon) -> tuple[Box, Point]:
    """Tight axis-aligned bounding box of the polygon and its center."""
    xs = [v.x for v in p.vertices]
    ys = [v.y for v in p.vertices]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    box = Box(x0, y0, x1 - x0, y1 - y0)
    return box, box.center()


def max_window_at(c: Point, img_w: float, img_h: float) -> Box:
    """Largest box centered exactly at c that stays inside the image."""
    if not (0 < c.x < img_w and 0 < c.y < img_h):
        raise ValueError(f"click ({c.x}, {c.y}) outside {img_w}x{img_h} image interior")
    w = 2.0 * min(c.x, img_w - c.x)
    h = 2.0 * min(c.y, img_h - c.y)
    return Box(c.x - w / 2.0, c.y - h / 2.0, w, h)


def euclidean(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)
