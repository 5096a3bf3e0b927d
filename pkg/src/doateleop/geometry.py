"""Planar geometry helpers shared by the field, vehicle and session modules.

All angles are radians wrapped to (-pi, pi]; points are (x, y) tuples in
meters. Pure-float implementations are used on purpose: these functions sit
in the per-tick hot path and scalar math beats numpy there.
"""

from __future__ import annotations

import math

Point = tuple[float, float]


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def rotate(v: Point, theta: float) -> Point:
    """Rotate a 2-D vector counterclockwise by theta."""
    c, s = math.cos(theta), math.sin(theta)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def dist(a: Point, b: Point) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def _orient(a: Point, b: Point, c: Point) -> float:
    """Signed area of the triangle (a, b, c); >0 means counterclockwise."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True if segments p1-p2 and q1-q2 share at least one point."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    # Collinear / endpoint-touching cases.
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    """p is within the bounding box of the collinear segment a-b."""
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segment_hit_param(p1: Point, p2: Point, q1: Point, q2: Point) -> float | None:
    """Parameter t in [0, 1] where the directed segment p1->p2 first meets q1-q2.

    Returns None when there is no intersection. Collinear overlap reports the
    smallest t whose point lies on q1-q2 (conservative for collision sweeps).
    """
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    if denom == 0.0:
        if qpx * ry - qpy * rx != 0.0:
            return None  # parallel, not collinear
        # Collinear: project wall endpoints onto the motion direction.
        rr = rx * rx + ry * ry
        if rr == 0.0:
            return 0.0 if _on_segment(q1, q2, p1) else None
        t0 = (qpx * rx + qpy * ry) / rr
        t1 = ((q2[0] - p1[0]) * rx + (q2[1] - p1[1]) * ry) / rr
        lo, hi = min(t0, t1), max(t0, t1)
        if hi < 0.0 or lo > 1.0:
            return None
        return max(lo, 0.0)
    t = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return t
    return None
