"""Lane-graph map: explicit lane records plus preset road generators.

Map documents are YAML/JSON, versioned ``map/v1``. Two forms are accepted:

* preset form: ``preset: straight|two_way|tee|cross`` with a handful of knobs,
  expanded into explicit lanes by the generators below;
* explicit form: a ``lanes:`` list (centerline polyline, width, neighbors,
  successors) and optional ``intersections:`` polygons.

Right-hand traffic throughout: a lane's "right" neighbor lies on the positive
lateral side of its direction of travel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..geometry import (
    point_in_polygon,
    polyline_arclength,
    project_to_polyline,
    resample_polyline,
    wrap_angle,
)

MAP_VERSION = "map/v1"


class MapSpecError(ValueError):
    """Malformed map document; message names the offending location."""


@dataclass
class Lane:
    lane_id: str
    centerline: np.ndarray          # (n, 2) m, n >= 2, increasing arc length
    width: float
    successors: list[str] = field(default_factory=list)
    left: str | None = None
    right: str | None = None

    @property
    def length(self) -> float:
        return float(polyline_arclength(self.centerline)[-1])

    def heading_at(self, arc: float) -> float:
        s = polyline_arclength(self.centerline)
        i = int(np.clip(np.searchsorted(s, arc, side="right") - 1, 0, len(s) - 2))
        d = self.centerline[i + 1] - self.centerline[i]
        return math.atan2(d[1], d[0])

    def point_at(self, arc: float) -> np.ndarray:
        return resample_polyline(self.centerline, np.array([arc]))[0]


@dataclass
class MapGraph:
    lanes: dict[str, Lane]
    intersections: list[np.ndarray]         # convex polygons, (m, 2)

    def validate(self) -> None:
        if not self.lanes:
            raise MapSpecError("map has no lanes")
        for lane in self.lanes.values():
            if len(lane.centerline) < 2:
                raise MapSpecError(f"lane '{lane.lane_id}': centerline needs >= 2 points")
            seg = np.linalg.norm(np.diff(lane.centerline, axis=0), axis=1)
            if np.any(seg <= 0.0):
                raise MapSpecError(f"lane '{lane.lane_id}': arc length not strictly increasing")
            if lane.width <= 0.0:
                raise MapSpecError(f"lane '{lane.lane_id}': width must be positive")
            for ref, kind in ([(s, "successor") for s in lane.successors]
                              + [(lane.left, "left neighbor"), (lane.right, "right neighbor")]):
                if ref is not None and ref not in self.lanes:
                    raise MapSpecError(f"lane '{lane.lane_id}': {kind} id '{ref}' does not resolve")
        for k, poly in enumerate(self.intersections):
            if len(poly) < 3:
                raise MapSpecError(f"intersection {k}: polygon needs >= 3 vertices")
            if _self_intersects(poly):
                raise MapSpecError(f"intersection {k}: polygon is self-intersecting")

    def in_intersection(self, point: np.ndarray) -> bool:
        return any(point_in_polygon(point, poly) for poly in self.intersections)

    def on_drivable(self, point: np.ndarray) -> bool:
        if self.in_intersection(point):
            return True
        for lane in self.lanes.values():
            _, lat, _, _ = project_to_polyline(point, lane.centerline)
            if abs(lat) <= lane.width / 2.0:
                return True
        return False

    def nearest_lane(self, point: np.ndarray, heading: float | None = None) -> tuple[str, float, float, float]:
        """Nearest lane (same-direction when `heading` given).

        Returns (lane_id, arc position, signed lateral offset, lane heading at
        the projection). Falls back to the nearest lane of any direction when
        no same-direction lane exists.
        """
        best = None
        best_any = None
        for lane_id in sorted(self.lanes):
            lane = self.lanes[lane_id]
            arc, lat, lane_heading, _ = project_to_polyline(point, lane.centerline)
            entry = (abs(lat), lane_id, arc, lat, lane_heading)
            if best_any is None or entry < best_any:
                best_any = entry
            if heading is None or abs(wrap_angle(heading - lane_heading)) < math.pi / 2.0:
                if best is None or entry < best:
                    best = entry
        chosen = best if best is not None else best_any
        _, lane_id, arc, lat, lane_heading = chosen
        return lane_id, arc, lat, lane_heading


def _self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    return (orient(a, b, c) != orient(a, b, d)
            and orient(c, d, a) != orient(c, d, b)
            and orient(a, b, c) != 0 and orient(c, d, a) != 0)


# ---------------------------------------------------------------------------
# document parsing


def build_map(spec: dict | str) -> MapGraph:
    """Build and validate a MapGraph from a map/v1 document (dict or YAML text)."""
    if isinstance(spec, str):
        try:
            spec = yaml.safe_load(spec)
        except yaml.YAMLError as e:
            raise MapSpecError(f"map document is not valid YAML: {e}") from e
    if not isinstance(spec, dict):
        raise MapSpecError("map document must be a mapping")
    version = spec.get("version")
    if version != MAP_VERSION:
        raise MapSpecError(f"field 'version': expected '{MAP_VERSION}', got {version!r}")

    if "preset" in spec:
        graph = _build_preset(spec)
    elif "lanes" in spec:
        graph = _build_explicit(spec)
    else:
        raise MapSpecError("map document needs either 'preset' or 'lanes'")
    graph.validate()
    return graph


def _build_explicit(spec: dict) -> MapGraph:
    lanes: dict[str, Lane] = {}
    for k, rec in enumerate(spec.get("lanes", [])):
        where = f"lanes[{k}]"
        if not isinstance(rec, dict) or "id" not in rec:
            raise MapSpecError(f"{where}: lane record needs an 'id'")
        lane_id = str(rec["id"])
        if lane_id in lanes:
            raise MapSpecError(f"{where}: duplicate lane id '{lane_id}'")
        try:
            centerline = np.asarray(rec["centerline"], dtype=float).reshape(-1, 2)
        except (KeyError, ValueError, TypeError) as e:
            raise MapSpecError(f"{where}: bad 'centerline': {e}") from e
        lanes[lane_id] = Lane(
            lane_id=lane_id,
            centerline=centerline,
            width=float(rec.get("width", 3.5)),
            successors=[str(s) for s in rec.get("successors", [])],
            left=None if rec.get("left") is None else str(rec["left"]),
            right=None if rec.get("right") is None else str(rec["right"]),
        )
    intersections = [np.asarray(p, dtype=float).reshape(-1, 2)
                     for p in spec.get("intersections", [])]
    return MapGraph(lanes=lanes, intersections=intersections)


def map_to_document(graph: MapGraph) -> dict:
    """Explicit map/v1 document for a graph (deterministic key order)."""
    return {
        "version": MAP_VERSION,
        "lanes": [
            {
                "id": lane.lane_id,
                "centerline": [[round(float(x), 6), round(float(y), 6)]
                               for x, y in lane.centerline],
                "width": lane.width,
                "successors": list(lane.successors),
                "left": lane.left,
                "right": lane.right,
            }
            for lane in (graph.lanes[k] for k in sorted(graph.lanes))
        ],
        "intersections": [[[round(float(x), 6), round(float(y), 6)] for x, y in poly]
                          for poly in graph.intersections],
    }


def map_document_bytes(graph: MapGraph) -> bytes:
    return json.dumps(map_to_document(graph), sort_keys=True, indent=1).encode() + b"\n"


# ---------------------------------------------------------------------------
# preset generators

_POINT_SPACING = 2.0  # m between generated centerline points


def _line(p0, p1) -> np.ndarray:
    # two points describe a straight centerline exactly
    return np.array([p0, p1], dtype=float)


def _arc(center, radius, a0, a1, spacing=_POINT_SPACING) -> np.ndarray:
    n = max(int(math.ceil(abs(a1 - a0) * radius / spacing)), 2)
    ang = np.linspace(a0, a1, n + 1)
    return np.stack([center[0] + radius * np.cos(ang),
                     center[1] + radius * np.sin(ang)], axis=1)


def _build_preset(spec: dict) -> MapGraph:
    preset = spec.get("preset")
    length = float(spec.get("length", 200.0))
    width = float(spec.get("width", 3.5))
    if preset == "straight":
        return _preset_straight(length, width, int(spec.get("lanes_per_direction", 2)))
    if preset == "two_way":
        return _preset_two_way(length, width)
    if preset in ("tee", "cross"):
        return _preset_junction(preset, length, width)
    raise MapSpecError(f"field 'preset': unknown preset {preset!r}")


def _preset_straight(length: float, width: float, n_lanes: int) -> MapGraph:
    if n_lanes < 1:
        raise MapSpecError("field 'lanes_per_direction': need >= 1")
    lanes = {}
    for i in range(n_lanes):
        lane_id = f"l{i}"
        lanes[lane_id] = Lane(
            lane_id=lane_id,
            centerline=_line([0.0, i * width], [length, i * width]),
            width=width,
            left=f"l{i - 1}" if i > 0 else None,
            right=f"l{i + 1}" if i < n_lanes - 1 else None,
        )
    return MapGraph(lanes=lanes, intersections=[])


def _preset_two_way(length: float, width: float) -> MapGraph:
    # eastbound keeps right (+y for +x heading), oncoming lane on its left
    east = Lane("east", _line([0.0, 0.0], [length, 0.0]), width)
    west = Lane("west", _line([length, -width], [0.0, -width]), width)
    return MapGraph(lanes={"east": east, "west": west}, intersections=[])


def _preset_junction(kind: str, length: float, width: float) -> MapGraph:
    """Two-way arms meeting at the origin with arc connectors through a square junction."""
    half = max(length, 40.0) / 2.0
    s = width + 2.5          # junction half-size; keeps turn radii feasible
    arms = ["e", "w", "n", "s"] if kind == "cross" else ["e", "w", "s"]
    # arm axis directions pointing away from the junction center
    axis = {"e": np.array([1.0, 0.0]), "w": np.array([-1.0, 0.0]),
            "n": np.array([0.0, 1.0]), "s": np.array([0.0, -1.0])}

    lanes: dict[str, Lane] = {}
    for a in arms:
        u = axis[a]
        right_in = np.array([-u[1], u[0]]) * (width / 2.0)   # right of inbound travel (-u -> toward center)
        # inbound lane: from arm tip toward junction edge
        tip = u * half
        edge = u * s
        lanes[f"{a}_in"] = Lane(f"{a}_in", _line(tip - right_in, edge - right_in), width)
        lanes[f"{a}_out"] = Lane(f"{a}_out", _line(edge + right_in, tip + right_in), width)

    def connect(a_in: str, a_out: str) -> None:
        lane_a = lanes[f"{a_in}_in"]
        lane_b = lanes[f"{a_out}_out"]
        p0 = lane_a.centerline[-1]
        h0 = lane_a.heading_at(lane_a.length)
        p1 = lane_b.centerline[0]
        h1 = lane_b.heading_at(0.0)
        cid = f"{a_in}_{a_out}"
        turn = wrap_angle(h1 - h0)
        if abs(turn) < 1e-9:
            center = _line(p0, p1)
        else:
            # tangent arc: center offset perpendicular to both end headings
            n0 = np.array([-math.sin(h0), math.cos(h0)])
            radius = abs((p1 - p0)[0] * math.cos(h0) + (p1 - p0)[1] * math.sin(h0)) / abs(math.sin(abs(turn)))
            c = p0 + n0 * radius * (1 if turn > 0 else -1)
            a0 = math.atan2(p0[1] - c[1], p0[0] - c[0])
            center = _arc(c, radius, a0, a0 + turn)
            center[0] = p0
            center[-1] = p1
        lanes[cid] = Lane(cid, center, width)
        lane_a.successors.append(cid)
        lanes[cid].successors.append(f"{a_out}_out")

    for a in arms:
        for b in arms:
            if b != a:
                connect(a, b)

    poly = np.array([[s, s], [-s, s], [-s, -s], [s, -s]])
    return MapGraph(lanes=lanes, intersections=[poly])
