"""Shared planar geometry helpers.

Conventions used throughout the package:
  - world frame: x/y in meters, heading in radians measured from +x.
  - "right" of a heading th is the direction obtained by rotating the heading
    vector by +90 deg, i.e. (-sin th, cos th). Positive steering turns right,
    positive lateral offset means right of a centerline, left offsets are
    negative.
"""

from __future__ import annotations

import math

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def heading_vec(heading: float) -> np.ndarray:
    return np.array([math.cos(heading), math.sin(heading)])


def right_normal(heading: float) -> np.ndarray:
    """Unit vector pointing to the right of `heading`."""
    return np.array([-math.sin(heading), math.cos(heading)])


def rot_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def to_frame(points: np.ndarray, origin: np.ndarray, heading: float) -> np.ndarray:
    """World points -> frame anchored at `origin` with +x along `heading`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(origin, dtype=float)
    return pts @ rot_matrix(heading)  # equals R(-heading) applied to rows


def from_frame(points: np.ndarray, origin: np.ndarray, heading: float) -> np.ndarray:
    """Inverse of :func:`to_frame`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return pts @ rot_matrix(heading).T + np.asarray(origin, dtype=float)


def polyline_arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length, starting at 0, one entry per point."""
    pts = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_polyline(points: np.ndarray, arcs: np.ndarray) -> np.ndarray:
    """Points at the given arc-length positions; extrapolates along end tangents."""
    pts = np.asarray(points, dtype=float)
    s = polyline_arclength(pts)
    total = s[-1]
    out = np.empty((len(arcs), 2))
    for k, a in enumerate(np.asarray(arcs, dtype=float)):
        if a <= 0.0:
            d = pts[1] - pts[0]
            n = np.linalg.norm(d)
            out[k] = pts[0] + (a / n) * d if n > 0 else pts[0]
        elif a >= total:
            d = pts[-1] - pts[-2]
            n = np.linalg.norm(d)
            out[k] = pts[-1] + ((a - total) / n) * d if n > 0 else pts[-1]
        else:
            i = int(np.searchsorted(s, a, side="right")) - 1
            seg = s[i + 1] - s[i]
            t = (a - s[i]) / seg if seg > 0 else 0.0
            out[k] = pts[i] + t * (pts[i + 1] - pts[i])
    return out


def project_to_polyline(point: np.ndarray, pts: np.ndarray) -> tuple[float, float, float, int]:
    """Closest point on a polyline.

    Returns (arc position of projection, signed lateral offset, segment heading,
    segment index). Lateral offset is positive to the right of the polyline
    direction.
    """
    p = np.asarray(point, dtype=float)
    pts = np.asarray(pts, dtype=float)
    a = pts[:-1]
    d = pts[1:] - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(seg_len2 > 0.0, seg_len2, 1.0)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / safe, 0.0, 1.0)
    q = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", p - q, p - q)
    dist2 = np.where(seg_len2 > 0.0, dist2, math.inf)
    i = int(np.argmin(dist2))
    seg_len = math.sqrt(seg_len2[i])
    heading = math.atan2(d[i, 1], d[i, 0])
    lateral = float(np.dot(p - q[i], right_normal(heading)))
    lengths = np.sqrt(np.where(seg_len2 > 0.0, seg_len2, 0.0))
    arc = float(np.sum(lengths[:i]) + t[i] * seg_len)
    return arc, lateral, heading, i


def point_in_polygon(point: np.ndarray, polygon: np.ndarray) -> bool:
    """Even-odd rule containment test; boundary points count as inside."""
    x, y = float(point[0]), float(point[1])
    poly = np.asarray(polygon, dtype=float)
    n = len(poly)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        elif yi == y and xi == x:
            return True
        j = i
    return inside


def menger_curvature(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Curvature of the circle through three points; 0 for collinear/degenerate."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    ab = np.linalg.norm(b - a)
    bc = np.linalg.norm(c - b)
    ca = np.linalg.norm(c - a)
    denom = ab * bc * ca
    if denom < 1e-12:
        return 0.0
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return abs(2.0 * cross / denom)


def curvature_profile(points: np.ndarray, min_spacing: float = 1e-6) -> np.ndarray:
    """Menger curvature at interior points; near-stationary triplets give 0."""
    pts = np.asarray(points, dtype=float)
    out = np.zeros(max(len(pts) - 2, 0))
    for i in range(1, len(pts) - 1):
        if (np.linalg.norm(pts[i] - pts[i - 1]) < min_spacing
                or np.linalg.norm(pts[i + 1] - pts[i]) < min_spacing):
            continue
        out[i - 1] = menger_curvature(pts[i - 1], pts[i], pts[i + 1])
    return out
