"""Planar primitives for door ROIs: boxes, door lines and polygons.

All coordinates are continuous pixel values in the camera frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from busod.errors import ConfigError

_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ConfigError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class BoundingBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"box must have positive size, got {self.width}x{self.height}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def translated(self, dx: float, dy: float) -> BoundingBox:
        return BoundingBox(self.left + dx, self.top + dy, self.width, self.height)

    def as_list(self) -> list[float]:
        return [self.left, self.top, self.width, self.height]


class Side(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True, slots=True)
class DoorLine:
    """Directed segment ``a -> b``; ``interior_side`` names the cabin half-plane.

    The positive half-plane is the one where ``cross(b - a, p - a) > 0``.
    """

    a: Point2
    b: Point2
    interior_side: Side = Side.POSITIVE

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ConfigError("door line endpoints must differ")


Polygon = Sequence[Point2]


@dataclass(frozen=True)
class Roi:
    polygon: tuple[Point2, ...]
    door_line: DoorLine
    queue_region: tuple[Point2, ...] | None = None
    door_id: str = "door"

    def __post_init__(self) -> None:
        validate_polygon(self.polygon)
        if self.queue_region is not None:
            validate_polygon(self.queue_region)
            if any(signed_distance(p, self.door_line) > _EPS for p in self.queue_region):
                raise ConfigError("queue_region must lie on the exterior side of the door line")


def signed_distance(p: Point2, line: DoorLine) -> float:
    """Perpendicular distance to the door line, positive on the interior side."""
    dx = line.b.x - line.a.x
    dy = line.b.y - line.a.y
    cross = dx * (p.y - line.a.y) - dy * (p.x - line.a.x)
    d = cross / math.hypot(dx, dy)
    return d if line.interior_side is Side.POSITIVE else -d


def box_center(b: BoundingBox) -> Point2:
    return Point2(b.left + b.width / 2.0, b.top + b.height / 2.0)


def iou(b1: BoundingBox, b2: BoundingBox) -> float:
    iw = min(b1.right, b2.right) - max(b1.left, b2.left)
    ih = min(b1.bottom, b2.bottom) - max(b1.top, b2.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = b1.width * b1.height + b2.width * b2.height - inter
    return min(1.0, inter / union)


def _on_segment(p: Point2, a: Point2, b: Point2) -> bool:
    cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
    scale = max(1.0, abs(b.x - a.x) + abs(b.y - a.y))
    if abs(cross) > _EPS * scale:
        return False
    return (
        min(a.x, b.x) - _EPS <= p.x <= max(a.x, b.x) + _EPS
        and min(a.y, b.y) - _EPS <= p.y <= max(a.y, b.y) + _EPS
    )


def contains(polygon: Polygon, p: Point2) -> bool:
    """Point-in-polygon test; points on the boundary count as inside."""
    n = len(polygon)
    if n < 3:
        raise ConfigError(f"polygon needs at least 3 vertices, got {n}")
    inside = False
    j = n - 1
    for i in range(n):
        a, b = polygon[j], polygon[i]
        if _on_segment(p, a, b):
            return True
        if (b.y > p.y) != (a.y > p.y):
            x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y)
            if p.x < x_cross:
                inside = not inside
        j = i
    return inside


def _orient(a: Point2, b: Point2, c: Point2) -> float:
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    return (
        _on_segment(p1, q1, q2)
        or _on_segment(p2, q1, q2)
        or _on_segment(q1, p1, p2)
        or _on_segment(q2, p1, p2)
    )


def is_simple(polygon: Polygon) -> bool:
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share a vertex by construction
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def validate_polygon(polygon: Polygon) -> None:
    if len(polygon) < 3:
        raise ConfigError(f"polygon needs at least 3 vertices, got {len(polygon)}")
    if not is_simple(polygon):
        raise ConfigError("polygon is self-intersecting")


def box_corners(b: BoundingBox) -> tuple[Point2, Point2, Point2, Point2]:
    return (
        Point2(b.left, b.top),
        Point2(b.right, b.top),
        Point2(b.right, b.bottom),
        Point2(b.left, b.bottom),
    )


def box_intersects_polygon(b: BoundingBox, polygon: Polygon) -> bool:
    """True when the box overlaps the polygon or touches its boundary."""
    corners = box_corners(b)
    if any(contains(polygon, c) for c in corners):
        return True
    if any(b.left <= v.x <= b.right and b.top <= v.y <= b.bottom for v in polygon):
        return True
    n = len(polygon)
    for i in range(n):
        a, c = polygon[i], polygon[(i + 1) % n]
        for k in range(4):
            if segments_intersect(a, c, corners[k], corners[(k + 1) % 4]):
                return True
    return False


def distance(p: Point2, q: Point2) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)
