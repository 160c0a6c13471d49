"""Trot/crawl gait scheduling, swing-foot profiles and the support-polygon
stability margin (signed shortest distance from the projected COM to the
boundary of the stance-foot convex hull)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import NUM_LEGS


class FlightPhaseError(ValueError):
    """Support polygon requested with zero stance feet."""


@dataclass
class GaitSchedule:
    freq: float = 2.0
    duty: float = 0.5
    phase_offset: tuple[float, float, float, float] = (0.0, 0.5, 0.5, 0.0)  # fl, fr, bl, br
    step_height: float = 0.05
    stride: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty must be in (0, 1)")
        if self.freq < 0.0:
            raise ValueError("freq must be >= 0")

    @property
    def cycle_time(self) -> float:
        return 1.0 / self.freq if self.freq > 0 else math.inf

    @classmethod
    def trot(cls, freq: float = 2.0, step_height: float = 0.05, stride: float = 0.0) -> "GaitSchedule":
        """Two-contact trot: diagonal pairs in antiphase, duty 0.5."""
        return cls(freq=freq, duty=0.5, phase_offset=(0.0, 0.5, 0.5, 0.0),
                   step_height=step_height, stride=stride)

    @classmethod
    def crawl(cls, freq: float = 1.0, step_height: float = 0.05, stride: float = 0.0) -> "GaitSchedule":
        """Three-contact gait: one leg in swing at a time, duty 0.75."""
        return cls(freq=freq, duty=0.75, phase_offset=(0.0, 0.5, 0.25, 0.75),
                   step_height=step_height, stride=stride)


def gait_phase(t: float, sched: GaitSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Per-leg (phase in [0,1), stance flag) at time t. A leg is in stance
    while its phase is below the duty fraction."""
    if t < 0:
        raise ValueError("t must be >= 0")
    phases = np.array([(t * sched.freq + off) % 1.0 for off in sched.phase_offset])
    stance = phases < sched.duty
    return phases, stance


def swing_trajectory(u: float, sched: GaitSchedule) -> tuple[float, float]:
    """Swing-foot displacement (dx along heading, dz lift) at swing progress
    u in [0, 1]: half-sine lift, touchdown-symmetric horizontal sweep."""
    if not 0.0 <= u <= 1.0:
        raise ValueError("swing progress must be in [0, 1]")
    dz = sched.step_height * math.sin(math.pi * u)
    dx = sched.stride * (u - 0.5)
    return dx, dz


def support_polygon(points_xy) -> np.ndarray:
    """Convex hull of stance-foot ground projections, counter-clockwise.
    Degenerate supports come back as a single point (1, 2) or segment (2, 2)."""
    pts = np.atleast_2d(np.asarray(points_xy, dtype=float))
    if pts.shape[0] == 0:
        raise FlightPhaseError("no stance feet, support polygon undefined")
    uniq = sorted({(float(p[0]), float(p[1])) for p in pts})
    if len(uniq) == 1:
        return np.array(uniq)
    hull = _convex_hull(uniq)
    return np.array(hull)


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain on pre-sorted unique points; collinear inputs
    collapse to a 2-point segment."""

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in points:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(points):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all points collinear
        return [points[0], points[-1]]
    return hull


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    u = max(0.0, min(1.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + u * ab)))


def stability_margin(com_xy, polygon: np.ndarray) -> float:
    """Signed distance from the projected COM to the support boundary:
    positive inside a true polygon, zero on the boundary, negative outside.
    Point and segment supports have no interior, so the value is <= 0."""
    p = np.asarray(com_xy, dtype=float)
    poly = np.atleast_2d(np.asarray(polygon, dtype=float))
    n = poly.shape[0]
    if n == 1:
        return -float(np.linalg.norm(p - poly[0]))
    if n == 2:
        return -_point_segment_distance(p, poly[0], poly[1])
    dist = min(_point_segment_distance(p, poly[i], poly[(i + 1) % n]) for i in range(n))
    return dist if _point_in_convex(p, poly) else -dist


def _point_in_convex(p: np.ndarray, poly: np.ndarray) -> bool:
    """Closed membership in a ccw convex polygon."""
    n = poly.shape[0]
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0:
            return False
    return True
