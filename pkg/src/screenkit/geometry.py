"""Pixel-space geometry primitives.

Boxes follow the [x1, y1, x2, y2] convention with the origin at the top-left
corner. Coordinates are continuous: detector backends are free to emit
fractional boxes and nothing here quantises them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box. Zero-area boxes are rejected at construction."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate in {self!r}")
            if v < 0:
                raise ValueError(f"negative coordinate in {self!r}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box (x1<x2 and y1<y2 required): {self!r}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @classmethod
    def from_list(cls, coords) -> "BBox":
        if len(coords) != 4:
            raise ValueError(f"expected 4 coordinates, got {len(coords)}")
        return cls(float(coords[0]), float(coords[1]), float(coords[2]), float(coords[3]))


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y):
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate in {self!r}")
            if v < 0:
                raise ValueError(f"negative coordinate in {self!r}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def contains(outer: BBox, inner: BBox, eps: float = 1.0) -> bool:
    """True iff ``inner`` lies within ``outer`` expanded by ``eps`` on all sides.

    Text and icon detectors disagree by about a pixel at shared edges, so the
    default tolerance is 1 px.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return (
        inner.x1 >= outer.x1 - eps
        and inner.y1 >= outer.y1 - eps
        and inner.x2 <= outer.x2 + eps
        and inner.y2 <= outer.y2 + eps
    )


def center(b: BBox) -> Point:
    return Point((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)


def point_in(b: BBox, p: Point) -> bool:
    """Boundary-inclusive membership test on all four edges."""
    return b.x1 <= p.x <= b.x2 and b.y1 <= p.y <= b.y2


def euclidean(p: Point, q: Point) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)
