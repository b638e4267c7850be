"""World state container, lane localization and the per-step trace record."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..geometry import wrap_angle
from .collision import detect_collisions
from .mapgraph import MapGraph
from .vehicle import BicycleParams, VehicleState

EGO_ID = "ego"


@dataclass
class LaneMetrics:
    lateral_offset: float       # m, right positive / left negative
    heading_error: float        # rad, wrapped to (-pi, pi]
    in_intersection: bool
    off_road: bool
    lane_id: str
    arc_pos: float


def lane_metrics(v: VehicleState, graph: MapGraph) -> LaneMetrics:
    """Offset/heading error against the nearest same-direction lane."""
    lane_id, arc, lat, lane_heading = graph.nearest_lane(v.position(), v.heading)
    lane = graph.lanes[lane_id]
    in_inter = graph.in_intersection(v.position())
    off_road = abs(lat) > lane.width / 2.0 and not in_inter
    return LaneMetrics(
        lateral_offset=lat,
        heading_error=wrap_angle(v.heading - lane_heading),
        in_intersection=in_inter,
        off_road=off_road,
        lane_id=lane_id,
        arc_pos=arc,
    )


@dataclass
class WorldState:
    """One simulated scene: map, ego, agents, and the owned RNG stream."""

    graph: MapGraph
    ego: VehicleState
    agents: dict[str, VehicleState] = field(default_factory=dict)
    risky_id: str | None = None
    time_step: int = 0
    fps: float = 15.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    plant: BicycleParams = BicycleParams()

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    def vehicle(self, vid: str) -> VehicleState:
        return self.ego if vid == EGO_ID else self.agents[vid]

    def all_vehicles(self) -> dict[str, VehicleState]:
        out = {EGO_ID: self.ego}
        out.update(self.agents)
        return out

    def localize_all(self) -> None:
        for v in self.all_vehicles().values():
            lane_id, arc, _, _ = self.graph.nearest_lane(v.position(), v.heading)
            v.lane_id = lane_id
            v.arc_pos = arc

    def collisions(self) -> list[tuple[str, str, float]]:
        return detect_collisions(self.all_vehicles())

    def trace_record(self) -> dict:
        rec = {
            "t": self.time_step,
            "risky": self.risky_id,
            "vehicles": {
                vid: {
                    "x": round(v.x, 4), "y": round(v.y, 4),
                    "heading": round(v.heading, 5), "speed": round(v.speed, 4),
                }
                for vid, v in sorted(self.all_vehicles().items())
            },
            "collisions": [[a, b, round(s, 4)] for a, b, s in self.collisions()],
        }
        return rec


def write_trace_line(fh, world: WorldState) -> None:
    fh.write(json.dumps(world.trace_record(), sort_keys=True) + "\n")


def spawn_world(graph: MapGraph, n_agents: int, seed: int,
                fps: float = 15.0, min_gap: float = 12.0,
                plant: BicycleParams = BicycleParams()) -> WorldState:
    """Ego plus n autopilot agents at random on-lane positions, mutually spaced."""
    rng = np.random.default_rng(seed)
    lane_ids = sorted(graph.lanes)
    taken: list[tuple[str, float]] = []

    def sample_slot() -> tuple[str, float] | None:
        for _ in range(200):
            lane_id = lane_ids[int(rng.integers(len(lane_ids)))]
            lane = graph.lanes[lane_id]
            if lane.length < min_gap:
                continue
            arc = float(rng.uniform(2.0, lane.length - 2.0))
            pos = lane.point_at(arc)
            ok = True
            for other_id, other_arc in taken:
                other_pos = graph.lanes[other_id].point_at(other_arc)
                if np.linalg.norm(pos - other_pos) < min_gap:
                    ok = False
                    break
            if ok:
                return lane_id, arc
        return None

    def make_vehicle(lane_id: str, arc: float, speed: float) -> VehicleState:
        lane = graph.lanes[lane_id]
        p = lane.point_at(arc)
        return VehicleState(x=float(p[0]), y=float(p[1]),
                            heading=lane.heading_at(arc), speed=speed,
                            lane_id=lane_id, arc_pos=arc)

    slot = sample_slot()
    if slot is None:
        raise ValueError("could not place the ego vehicle; map too small for min_gap")
    taken.append(slot)
    ego = make_vehicle(*slot, speed=float(rng.uniform(2.0, 6.0)))

    agents: dict[str, VehicleState] = {}
    for k in range(n_agents):
        slot = sample_slot()
        if slot is None:
            break
        taken.append(slot)
        agents[f"a{k:02d}"] = make_vehicle(*slot, speed=float(rng.uniform(2.0, 8.0)))

    world = WorldState(graph=graph, ego=ego, agents=agents, fps=fps, rng=rng, plant=plant)
    world.localize_all()
    return world
