"""Static SVG polar plots of scans, obstacles, and goal markers.

Plots are scaled to the scan's max range with a dashed range ring; readings
at max range (no return) are drawn faint so real hits stand out.
"""

from __future__ import annotations

import math
from pathlib import Path

from .geometry import CIRCLE, ObstacleShape
from .scan import GoalFeatures, Scan

_SIZE = 440
_MARGIN = 28

_COLOR_BASE = "#9ecae1"
_COLOR_COMBINED = "#15507a"
_COLOR_OBSTACLE = "#c0392b"
_COLOR_GOAL = "#f28c28"
_COLOR_RING = "#b5b5b5"


class _Frame:
    """World-to-screen transform; +y up, sensor at the canvas center."""

    def __init__(self, max_range: float):
        self.scale = (_SIZE / 2 - _MARGIN) / max_range
        self.cx = _SIZE / 2
        self.cy = _SIZE / 2
        self.max_range = max_range

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return self.cx + x * self.scale, self.cy - y * self.scale


def _svg_open(label: str | None) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
    ]
    if label:
        parts.append(f'<text x="10" y="18" font-family="sans-serif" font-size="13" fill="#555">{label}</text>')
    return parts


def _ring(frame: _Frame) -> str:
    r = frame.max_range * frame.scale
    return (
        f'<circle cx="{frame.cx:.2f}" cy="{frame.cy:.2f}" r="{r:.2f}" fill="none" '
        f'stroke="{_COLOR_RING}" stroke-width="1" stroke-dasharray="5 4"/>'
    )


def _sensor_dot(frame: _Frame) -> str:
    return f'<circle cx="{frame.cx:.2f}" cy="{frame.cy:.2f}" r="4" fill="black"/>'


def _scan_points(frame: _Frame, scan: Scan, color: str) -> list[str]:
    parts = []
    n = scan.n
    for i, reading in enumerate(scan.readings):
        theta = 2.0 * math.pi * i / n
        x, y = frame.pt(reading * math.cos(theta), reading * math.sin(theta))
        opacity = 0.22 if reading >= scan.max_range else 0.9
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.7" fill="{color}" fill-opacity="{opacity}"/>')
    return parts


def _obstacle_outline(frame: _Frame, shape: ObstacleShape) -> str:
    cx, cy = frame.pt(shape.center.x, shape.center.y)
    if shape.kind == CIRCLE:
        return (
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{shape.radius * frame.scale:.2f}" fill="none" '
            f'stroke="{_COLOR_OBSTACLE}" stroke-width="1.5"/>'
        )
    hx, hy = shape.half_extents
    w = 2 * hx * frame.scale
    h = 2 * hy * frame.scale
    # Screen y points down, so a counter-clockwise world rotation is negative here.
    deg = -math.degrees(shape.orientation)
    return (
        f'<rect x="{-w / 2:.2f}" y="{-h / 2:.2f}" width="{w:.2f}" height="{h:.2f}" fill="none" '
        f'stroke="{_COLOR_OBSTACLE}" stroke-width="1.5" '
        f'transform="translate({cx:.2f} {cy:.2f}) rotate({deg:.2f})"/>'
    )


def _goal_marker(frame: _Frame, goal: GoalFeatures) -> str:
    # Goals beyond the plotted range are clamped onto the ring.
    d = min(goal.distance, frame.max_range)
    x, y = frame.pt(d * goal.cos, d * goal.sin)
    return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="6" fill="{_COLOR_GOAL}" fill-opacity="0.9"/>'


def scan_plot_svg(scan: Scan, goal: GoalFeatures | None = None, label: str | None = None) -> str:
    """Polar plot of one scan: range ring, one point per reading, sensor dot, goal."""
    frame = _Frame(scan.max_range)
    parts = _svg_open(label)
    parts.append(_ring(frame))
    parts.extend(_scan_points(frame, scan, _COLOR_COMBINED))
    if goal is not None:
        parts.append(_goal_marker(frame, goal))
    parts.append(_sensor_dot(frame))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cfe_plot_svg(
    base: Scan,
    combined: Scan,
    obstacles,
    goal: GoalFeatures | None = None,
    label: str | None = None,
) -> str:
    """Overlay plot: base scan light, combined scan dark, obstacle outlines, goal."""
    frame = _Frame(base.max_range)
    parts = _svg_open(label)
    parts.append(_ring(frame))
    parts.extend(_scan_points(frame, base, _COLOR_BASE))
    parts.extend(_scan_points(frame, combined, _COLOR_COMBINED))
    for shape in obstacles:
        parts.append(_obstacle_outline(frame, shape))
    if goal is not None:
        parts.append(_goal_marker(frame, goal))
    parts.append(_sensor_dot(frame))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, content: str) -> None:
    Path(path).write_text(content, encoding="utf-8")
