"""Base-trajectory construction: motion-model prediction, lane-following
waypoints, and their linear blend.

All trajectories are N points at a fixed dt, indexed i = 1..N (the point at
t = 0 is not part of the sequence). The blend weight on the motion-model
prediction decreases from (N-1)/N at the first point to 0 at the last, so the
result starts along the vehicle's current motion and ends on the lane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import from_frame, polyline_arclength, resample_polyline, to_frame, wrap_angle
from .world.mapgraph import MapGraph
from .world.vehicle import VehicleState

# rad/s below which the straight-line limit is used; small enough that the
# straight branch stays within 1e-4 m of the true arc over a 3 s horizon,
# large enough to dodge cancellation in (v/w)(sin(th+wt) - sin th)
YAW_RATE_EPS = 1e-6


class Stage(enum.Enum):
    MODEL = "model"          # motion-model prediction
    MAP = "map"              # lane-following waypoints
    BASE = "base"            # linear blend of the two above
    EDIT = "edit"            # raw editor output
    SMOOTHED = "smoothed"    # after spline smoothing
    CURVE = "curve"          # after sigmoid blending with base
    FINAL = "final"          # after tracked rollout


_ORDER = [Stage.MODEL, Stage.MAP, Stage.BASE, Stage.EDIT, Stage.SMOOTHED,
          Stage.CURVE, Stage.FINAL]


class Frame(enum.Enum):
    WORLD = "world"
    AGENT = "agent"          # relative to the edited agent's pose at t = 0


@dataclass
class Trajectory:
    stage: Stage
    points: np.ndarray       # (N, 2) m
    dt: float
    frame: Frame = Frame.WORLD

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise ValueError("trajectory needs an (N,2) array with N >= 2")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("trajectory has non-finite coordinates")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n(self) -> int:
        return len(self.points)

    def derive(self, stage: Stage, points: np.ndarray, frame: Frame | None = None) -> "Trajectory":
        if _ORDER.index(stage) < _ORDER.index(self.stage):
            raise ValueError(f"stage {stage.value} precedes {self.stage.value}")
        return Trajectory(stage=stage, points=points, dt=self.dt,
                          frame=self.frame if frame is None else frame)

    def to_agent_frame(self, origin: np.ndarray, heading: float) -> "Trajectory":
        if self.frame is Frame.AGENT:
            return self
        return Trajectory(self.stage, to_frame(self.points, origin, heading),
                          self.dt, Frame.AGENT)

    def to_world_frame(self, origin: np.ndarray, heading: float) -> "Trajectory":
        if self.frame is Frame.WORLD:
            return self
        return Trajectory(self.stage, from_frame(self.points, origin, heading),
                          self.dt, Frame.WORLD)

    def to_record(self) -> dict:
        return {
            "version": "traj/v1",
            "stage": self.stage.value,
            "frame": self.frame.value,
            "dt": self.dt,
            "points": [[round(float(x), 3), round(float(y), 3)] for x, y in self.points],
        }


def trajectory_from_record(rec: dict) -> Trajectory:
    if rec.get("version") != "traj/v1":
        raise ValueError(f"expected traj/v1 record, got {rec.get('version')!r}")
    return Trajectory(stage=Stage(rec["stage"]), points=np.asarray(rec["points"], dtype=float),
                      dt=float(rec["dt"]), frame=Frame(rec["frame"]))


def ctrv_points(x: float, y: float, heading: float, speed: float, yaw_rate: float,
                n: int, dt: float) -> np.ndarray:
    """Closed-form constant-yaw-rate, constant-speed prediction, i = 1..n."""
    t = dt * np.arange(1, n + 1)
    if abs(yaw_rate) > YAW_RATE_EPS:
        r = speed / yaw_rate
        xs = x + r * (np.sin(heading + yaw_rate * t) - math.sin(heading))
        ys = y - r * (np.cos(heading + yaw_rate * t) - math.cos(heading))
    else:
        xs = x + speed * t * math.cos(heading)
        ys = y + speed * t * math.sin(heading)
    return np.stack([xs, ys], axis=1)


def ctrv_predict(state: VehicleState, n: int, dt: float) -> Trajectory:
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = ctrv_points(state.x, state.y, state.heading, state.speed, state.yaw_rate, n, dt)
    if n == 1:
        pts = np.repeat(pts, 2, axis=0)  # container requires >= 2 points
    return Trajectory(stage=Stage.MODEL, points=pts, dt=dt)


def map_waypoint_traj(agent: VehicleState, graph: MapGraph, n: int, dt: float,
                      min_speed: float = 1.0) -> Trajectory:
    """Lane-centerline points ahead of the agent, spaced by its current speed.

    Follows successor lanes (straightest-turn first) and extrapolates along
    the final tangent when the lane chain runs out.
    """
    if agent.lane_id is None or agent.lane_id not in graph.lanes:
        raise ValueError("agent is not localized to a lane")
    speed = max(agent.speed, min_speed)
    step = speed * dt
    needed = step * n

    lane = graph.lanes[agent.lane_id]
    arc0 = agent.arc_pos
    pts = [lane.point_at(arc0)]
    chain = lane.centerline[polyline_arclength(lane.centerline) > arc0]
    pts.extend(chain)
    covered = lane.length - arc0
    current = lane
    guard = 0
    while covered < needed + step and guard < 64:
        guard += 1
        succs = current.successors
        if not succs:
            break
        end_heading = current.heading_at(current.length)
        # prefer the successor that continues straightest; ids break ties
        def turn(sid: str) -> tuple[float, str]:
            nxt = graph.lanes[sid]
            return (abs(wrap_angle(nxt.heading_at(0.0) - end_heading)), sid)
        current = graph.lanes[min(succs, key=turn)]
        pts.extend(current.centerline)
        covered += current.length

    poly = np.asarray(pts)
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > 1e-9:
            keep.append(i)
    poly = poly[keep]
    if len(poly) < 2:
        tangent = np.array([math.cos(agent.heading), math.sin(agent.heading)])
        poly = np.vstack([poly[0], poly[0] + tangent])
    arcs = step * np.arange(1, n + 1)
    return Trajectory(stage=Stage.MAP, points=resample_polyline(poly, arcs), dt=dt)


def fuse_linear(model: Trajectory, map_t: Trajectory) -> Trajectory:
    """Pointwise blend p_i = (1 - i/N) * model_i + (i/N) * map_i, i = 1..N."""
    if model.n != map_t.n:
        raise ValueError(f"length mismatch: {model.n} vs {map_t.n}")
    if model.frame is not map_t.frame:
        raise ValueError(f"frame mismatch: {model.frame.value} vs {map_t.frame.value}")
    if abs(model.dt - map_t.dt) > 1e-12:
        raise ValueError(f"dt mismatch: {model.dt} vs {map_t.dt}")
    n = model.n
    w = 1.0 - np.arange(1, n + 1) / n
    pts = w[:, None] * model.points + (1.0 - w)[:, None] * map_t.points
    return Trajectory(stage=Stage.BASE, points=pts, dt=model.dt, frame=model.frame)
