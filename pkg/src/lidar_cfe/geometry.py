"""Exact 2D ray casting against circle and oriented-rectangle obstacles.

Conventions, used consistently across the package:

* ray 0 points along +x and ray indices increase counter-clockwise,
* tangent rays count as hits,
* a ray cast from inside a shape returns the exit distance,
* scan rays that hit nothing read exactly ``max_range``.

All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .scan import Scan

CIRCLE = "circle"
RECTANGLE = "rectangle"


@dataclass(frozen=True)
class Point2:
    """A point in the world frame, in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point must be finite, got ({self.x}, {self.y})")


ORIGIN = Point2(0.0, 0.0)


@dataclass(frozen=True)
class ObstacleShape:
    """A circle or an oriented rectangle in world coordinates.

    Rectangles are symmetric under a half turn, so ``orientation`` is kept
    normalized to [0, pi). Circles ignore ``orientation`` and
    ``half_extents``; rectangles ignore ``radius``.
    """

    kind: str
    center: Point2
    radius: float | None = None
    half_extents: tuple[float, float] | None = None
    orientation: float = 0.0

    def __post_init__(self) -> None:
        if self.kind == CIRCLE:
            if self.radius is None or not (0.0 < self.radius < math.inf):
                raise ValueError(f"circle radius must be positive, got {self.radius}")
            object.__setattr__(self, "radius", float(self.radius))
            object.__setattr__(self, "half_extents", None)
            object.__setattr__(self, "orientation", 0.0)
        elif self.kind == RECTANGLE:
            if self.half_extents is None:
                raise ValueError("rectangle needs half_extents")
            hx, hy = (float(h) for h in self.half_extents)
            if not (0.0 < hx < math.inf and 0.0 < hy < math.inf):
                raise ValueError(f"rectangle half_extents must be positive, got {self.half_extents}")
            if not math.isfinite(self.orientation):
                raise ValueError(f"orientation must be finite, got {self.orientation}")
            turn = float(self.orientation) % math.pi
            if turn >= math.pi:  # float mod can round up to the divisor itself
                turn = 0.0
            object.__setattr__(self, "radius", None)
            object.__setattr__(self, "half_extents", (hx, hy))
            object.__setattr__(self, "orientation", turn)
        else:
            raise ValueError(f"unknown shape kind: {self.kind!r}")

    @classmethod
    def circle(cls, center: Point2, radius: float) -> "ObstacleShape":
        return cls(kind=CIRCLE, center=center, radius=radius)

    @classmethod
    def rectangle(
        cls,
        center: Point2,
        half_extents: tuple[float, float],
        orientation: float = 0.0,
    ) -> "ObstacleShape":
        return cls(kind=RECTANGLE, center=center, half_extents=tuple(half_extents), orientation=orientation)


@dataclass(frozen=True)
class Ray:
    """A half line from ``origin`` along ``heading`` (radians, wrapped to [0, 2pi))."""

    origin: Point2
    heading: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.heading):
            raise ValueError(f"heading must be finite, got {self.heading}")
        h = float(self.heading) % (2.0 * math.pi)
        if h >= 2.0 * math.pi:
            h = 0.0
        object.__setattr__(self, "heading", h)


def ray_circle_intersect(ray: Ray, circle: ObstacleShape) -> float | None:
    """Distance along the ray to the circle boundary, or None if missed.

    Returns the entry distance, the exit distance when the ray starts
    inside, and the tangent distance for a grazing ray.
    """
    if circle.kind != CIRCLE:
        raise ValueError(f"expected a circle, got {circle.kind}")
    dx = math.cos(ray.heading)
    dy = math.sin(ray.heading)
    fx = ray.origin.x - circle.center.x
    fy = ray.origin.y - circle.center.y
    # Unit direction, so t^2 + 2 b t + c = 0 with b = f.d and c = |f|^2 - r^2.
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - circle.radius * circle.radius
    disc = b * b - c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    t_exit = -b + root
    if t_exit < 0.0:
        return None
    t_enter = -b - root
    return t_enter if t_enter >= 0.0 else t_exit


def ray_rect_intersect(ray: Ray, rect: ObstacleShape) -> float | None:
    """Distance along the ray to the oriented rectangle, or None if missed.

    Slab test in the rectangle's local frame; same inside/exit conventions
    as :func:`ray_circle_intersect`.
    """
    if rect.kind != RECTANGLE:
        raise ValueError(f"expected a rectangle, got {rect.kind}")
    cos_o = math.cos(rect.orientation)
    sin_o = math.sin(rect.orientation)
    px = ray.origin.x - rect.center.x
    py = ray.origin.y - rect.center.y
    ox = px * cos_o + py * sin_o
    oy = -px * sin_o + py * cos_o
    wx = math.cos(ray.heading)
    wy = math.sin(ray.heading)
    dx = wx * cos_o + wy * sin_o
    dy = -wx * sin_o + wy * cos_o
    hx, hy = rect.half_extents
    t_enter = -math.inf
    t_exit = math.inf
    for o, d, h in ((ox, dx, hx), (oy, dy, hy)):
        if d == 0.0:
            if abs(o) > h:
                return None
            continue  # ray runs inside this slab; no constraint
        ta = (-h - o) / d
        tb = (h - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t_enter = max(t_enter, ta)
        t_exit = min(t_exit, tb)
        if t_enter > t_exit:
            return None
    if t_exit < 0.0:
        return None
    return t_enter if t_enter >= 0.0 else t_exit


@functools.lru_cache(maxsize=32)
def _ray_directions(n_rays: int) -> tuple[np.ndarray, np.ndarray]:
    headings = np.arange(n_rays) * (2.0 * math.pi / n_rays)
    dx = np.cos(headings)
    dy = np.sin(headings)
    dx.flags.writeable = False
    dy.flags.writeable = False
    return dx, dy


def _circle_hit_distances(ox: float, oy: float, dx: np.ndarray, dy: np.ndarray, circle: ObstacleShape) -> np.ndarray:
    fx = ox - circle.center.x
    fy = oy - circle.center.y
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - circle.radius * circle.radius
    disc = b * b - c
    hit = disc >= 0.0
    root = np.sqrt(np.where(hit, disc, 0.0))
    enter = -b - root
    leave = -b + root
    t = np.where(enter >= 0.0, enter, leave)
    return np.where(hit & (leave >= 0.0), t, np.inf)


def _slab_interval(o: float, d: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    # Entry/exit parameters of the slab |o + t d| <= h; rays parallel to the
    # slab map to (-inf, inf) when inside it and to an empty interval otherwise.
    parallel = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (-h - o) / d
        tb = (h - o) / d
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    inside = abs(o) <= h
    lo = np.where(parallel, -np.inf if inside else np.inf, lo)
    hi = np.where(parallel, np.inf if inside else -np.inf, hi)
    return lo, hi


def _rect_hit_distances(ox: float, oy: float, dx: np.ndarray, dy: np.ndarray, rect: ObstacleShape) -> np.ndarray:
    cos_o = math.cos(rect.orientation)
    sin_o = math.sin(rect.orientation)
    px = ox - rect.center.x
    py = oy - rect.center.y
    lox = px * cos_o + py * sin_o
    loy = -px * sin_o + py * cos_o
    ldx = dx * cos_o + dy * sin_o
    ldy = -dx * sin_o + dy * cos_o
    hx, hy = rect.half_extents
    lo_x, hi_x = _slab_interval(lox, ldx, hx)
    lo_y, hi_y = _slab_interval(loy, ldy, hy)
    t_enter = np.maximum(lo_x, lo_y)
    t_exit = np.minimum(hi_x, hi_y)
    hit = (t_enter <= t_exit) & (t_exit >= 0.0)
    t = np.where(t_enter >= 0.0, t_enter, t_exit)
    return np.where(hit, t, np.inf)


def raycast_scan(
    origin: Point2,
    shapes: list[ObstacleShape] | tuple[ObstacleShape, ...],
    n_rays: int = 180,
    max_range: float = 3.5,
) -> Scan:
    """Cast ``n_rays`` evenly spaced rays from ``origin`` and return the scan.

    Reading i is the nearest boundary distance over all shapes along heading
    ``2*pi*i/n_rays``, clamped to ``max_range``; rays that hit nothing read
    exactly ``max_range``.
    """
    if n_rays < 1:
        raise ValueError(f"n_rays must be >= 1, got {n_rays}")
    if not (0.0 < max_range < math.inf):
        raise ValueError(f"max_range must be positive and finite, got {max_range}")
    dx, dy = _ray_directions(n_rays)
    best = np.full(n_rays, np.inf)
    for shape in shapes:
        if shape.kind == CIRCLE:
            t = _circle_hit_distances(origin.x, origin.y, dx, dy, shape)
        else:
            t = _rect_hit_distances(origin.x, origin.y, dx, dy, shape)
        np.minimum(best, t, out=best)
    return Scan(np.minimum(best, max_range), max_range)


def shape_overlaps_disk(shape: ObstacleShape, center: Point2, radius: float) -> bool:
    """True iff the shape's closed region intersects the closed disk."""
    if radius < 0.0:
        raise ValueError(f"disk radius must be >= 0, got {radius}")
    if shape.kind == CIRCLE:
        gap = math.hypot(shape.center.x - center.x, shape.center.y - center.y)
        return gap <= shape.radius + radius
    cos_o = math.cos(shape.orientation)
    sin_o = math.sin(shape.orientation)
    px = center.x - shape.center.x
    py = center.y - shape.center.y
    lx = px * cos_o + py * sin_o
    ly = -px * sin_o + py * cos_o
    hx, hy = shape.half_extents
    # Closest point on the rectangle to the disk center, in the rect frame.
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    return math.hypot(lx - qx, ly - qy) <= radius


def shape_contains(shape: ObstacleShape, point: Point2) -> bool:
    """Closed-region membership test."""
    if shape.kind == CIRCLE:
        return math.hypot(point.x - shape.center.x, point.y - shape.center.y) <= shape.radius
    cos_o = math.cos(shape.orientation)
    sin_o = math.sin(shape.orientation)
    px = point.x - shape.center.x
    py = point.y - shape.center.y
    lx = px * cos_o + py * sin_o
    ly = -px * sin_o + py * cos_o
    hx, hy = shape.half_extents
    return abs(lx) <= hx and abs(ly) <= hy
