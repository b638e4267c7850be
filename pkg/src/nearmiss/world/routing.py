"""Route planning over the lane graph and route-relative waypoint queries."""

from __future__ import annotations

import heapq

import numpy as np

from ..geometry import polyline_arclength, resample_polyline, to_frame
from .mapgraph import MapGraph
from .vehicle import VehicleState


class NoRouteError(ValueError):
    pass


class Route:
    """Waypoint sequence from start to goal at roughly uniform spacing."""

    def __init__(self, waypoints: np.ndarray, spacing: float):
        self.waypoints = np.asarray(waypoints, dtype=float)
        self.spacing = spacing
        self.arcs = polyline_arclength(self.waypoints)
        self.length = float(self.arcs[-1])

    def progress(self, position: np.ndarray) -> float:
        """Arc position of the closest route point to `position`."""
        d = np.linalg.norm(self.waypoints - np.asarray(position, dtype=float), axis=1)
        return float(self.arcs[int(np.argmin(d))])


def plan_route(graph: MapGraph, start: np.ndarray, goal: np.ndarray,
               spacing: float = 2.0) -> Route:
    """A* shortest path over lane successors, then arc-length resampled.

    Entry cost is the remaining length of the start lane from the start
    projection; the goal must project onto a lane reachable through successor
    links (same lane included).
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if not graph.on_drivable(start):
        raise NoRouteError(f"start {start.tolist()} is not on the drivable area")
    if not graph.on_drivable(goal):
        raise NoRouteError(f"goal {goal.tolist()} is not on the drivable area")

    start_lane, start_arc, _, _ = graph.nearest_lane(start)
    goal_lane, goal_arc, _, _ = graph.nearest_lane(goal)

    if start_lane == goal_lane and goal_arc >= start_arc:
        return _stitch(graph, [start_lane], start_arc, goal_arc, spacing)

    # node = lane id, g = distance travelled when *entering* the lane start
    entry = graph.lanes[start_lane].length - start_arc
    frontier: list[tuple[float, float, str, tuple[str, ...]]] = []
    for succ in sorted(graph.lanes[start_lane].successors):
        h = float(np.linalg.norm(graph.lanes[succ].centerline[0] - goal))
        heapq.heappush(frontier, (entry + h, entry, succ, (start_lane, succ)))
    seen: dict[str, float] = {}
    while frontier:
        _, g, lane_id, path = heapq.heappop(frontier)
        if lane_id in seen and seen[lane_id] <= g:
            continue
        seen[lane_id] = g
        if lane_id == goal_lane:
            return _stitch(graph, list(path), start_arc, goal_arc, spacing)
        lane = graph.lanes[lane_id]
        for succ in sorted(lane.successors):
            g2 = g + lane.length
            h = float(np.linalg.norm(graph.lanes[succ].centerline[0] - goal))
            if succ not in seen or seen[succ] > g2:
                heapq.heappush(frontier, (g2 + h, g2, succ, path + (succ,)))
    raise NoRouteError(f"no lane-graph path from {start.tolist()} to {goal.tolist()}")


def _stitch(graph: MapGraph, lane_ids: list[str], start_arc: float,
            goal_arc: float, spacing: float) -> Route:
    pts = []
    for k, lane_id in enumerate(lane_ids):
        lane = graph.lanes[lane_id]
        s = polyline_arclength(lane.centerline)
        lo = start_arc if k == 0 else 0.0
        hi = goal_arc if k == len(lane_ids) - 1 else lane.length
        mask = (s >= lo) & (s <= hi)
        chunk = [lane.point_at(lo)] + [p for p in lane.centerline[mask]] + [lane.point_at(hi)]
        pts.extend(chunk)
    poly = np.asarray(pts)
    # drop duplicate joints, then resample to uniform spacing
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > 1e-9:
            keep.append(i)
    poly = poly[keep]
    total = polyline_arclength(poly)[-1]
    n = max(int(round(total / spacing)), 1)
    arcs = np.linspace(0.0, total, n + 1)
    return Route(resample_polyline(poly, arcs), spacing=total / n if n else spacing)


def upcoming_waypoints(route: Route, pose: VehicleState, k: int) -> np.ndarray:
    """The k route waypoints ahead of the vehicle, in the vehicle frame.

    Near the route end the final waypoint is repeated to keep the count at k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(route.waypoints) == 0:
        raise ValueError("route is empty")
    progress = route.progress(pose.position())
    ahead = np.nonzero(route.arcs > progress + 1e-9)[0]
    idx = list(ahead[:k])
    if not idx:
        idx = [len(route.waypoints) - 1]
    while len(idx) < k:
        idx.append(idx[-1])
    pts = route.waypoints[idx]
    return to_frame(pts, pose.position(), pose.heading)
