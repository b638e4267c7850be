"""Scene analysis for the editor: pick the risky agent, classify how it
drives relative to the ego, pick the hazardous maneuver, and pack the scene
message the editors consume.

All coordinates in a serialized scene are expressed in the risky agent's frame
at the current step and quantized to three decimals.
"""

from __future__ import annotations

import base64
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import project_to_polyline, to_frame, wrap_angle
from .trajgen import Trajectory
from .world.mapgraph import MapGraph
from .world.state import WorldState, EGO_ID
from .world.vehicle import VehicleState

SCENE_VERSION = "scene/v1"


class Direction(enum.Enum):
    SAME = "same"
    OPPOSITE = "opposite"


class LaneRelation(enum.Enum):
    SAME_LANE = "same_lane"
    DIFFERENT_LANE = "different_lane"
    NOT_APPLICABLE = "n/a"


class Longitudinal(enum.Enum):
    FRONT = "front"
    REAR = "rear"
    NOT_APPLICABLE = "n/a"


class Horizontal(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class DrivingMode:
    direction: Direction
    lane_relation: LaneRelation
    longitudinal: Longitudinal
    horizontal: Horizontal

    def __post_init__(self) -> None:
        d, lr, lo, ho = self.direction, self.lane_relation, self.longitudinal, self.horizontal
        if d is Direction.OPPOSITE:
            ok = (lr is LaneRelation.NOT_APPLICABLE and lo is Longitudinal.NOT_APPLICABLE
                  and ho is Horizontal.NOT_APPLICABLE)
        elif lr is LaneRelation.SAME_LANE:
            ok = lo is not Longitudinal.NOT_APPLICABLE and ho is Horizontal.NOT_APPLICABLE
        elif lr is LaneRelation.DIFFERENT_LANE:
            ok = lo is Longitudinal.NOT_APPLICABLE and ho is not Horizontal.NOT_APPLICABLE
        else:
            ok = False
        if not ok:
            raise ValueError(f"inconsistent driving mode: {self}")

    @property
    def position_category(self) -> str:
        """Wire tag used in editor prompts and messages."""
        if self.direction is Direction.OPPOSITE:
            return "opposite"
        if self.lane_relation is LaneRelation.SAME_LANE:
            return "same_ahead" if self.longitudinal is Longitudinal.FRONT else "same_behind"
        return "adjacent_left" if self.horizontal is Horizontal.LEFT else "adjacent_right"


class HazardousManeuver(enum.Enum):
    SUDDEN_BRAKE = "sudden-brake"
    OVERTAKE = "overtake"
    CUT_IN_LEFT = "cut-in-left"
    CUT_IN_RIGHT = "cut-in-right"
    LANE_ENCROACHMENT = "lane-encroachment"
    U_TURN = "u-turn"


class ClassificationError(ValueError):
    """Raised when a vehicle cannot be related to the lane graph."""


def select_risky_agent(world: WorldState, zone_radius: float) -> str | None:
    """Closest agent within the circular hazard zone around the ego; ties on
    distance break toward the lowest agent id."""
    if zone_radius <= 0:
        raise ValueError("zone_radius must be positive")
    ego_pos = world.ego.position()
    best: tuple[float, str] | None = None
    for aid in sorted(world.agents):
        d = float(np.linalg.norm(world.agents[aid].position() - ego_pos))
        if d <= zone_radius and (best is None or d < best[0]):
            best = (d, aid)
    return best[1] if best else None


def classify_driving_mode(ego: VehicleState, agent: VehicleState, graph: MapGraph) -> DrivingMode:
    """Relative driving mode per the maneuver-selection table.

    Direction is Same when the heading gap is under 90 deg; lane relation uses
    lane ids; longitudinal/horizontal use the sign of the agent position in
    the ego frame (x forward, y to the ego's right).
    """
    for name, v in (("ego", ego), ("agent", agent)):
        if v.lane_id is None or v.lane_id not in graph.lanes:
            raise ClassificationError(f"{name} is not localized to a lane")
        lane = graph.lanes[v.lane_id]
        _, lat, _, _ = project_to_polyline(v.position(), lane.centerline)
        if abs(lat) > lane.width:  # far outside any plausible corridor
            raise ClassificationError(f"{name} is off-road (lateral {lat:.2f} m)")

    gap = abs(wrap_angle(agent.heading - ego.heading))
    if gap >= math.pi / 2.0:
        return DrivingMode(Direction.OPPOSITE, LaneRelation.NOT_APPLICABLE,
                           Longitudinal.NOT_APPLICABLE, Horizontal.NOT_APPLICABLE)

    rel = to_frame(agent.position(), ego.position(), ego.heading)[0]
    if agent.lane_id == ego.lane_id:
        longitudinal = Longitudinal.FRONT if rel[0] >= 0.0 else Longitudinal.REAR
        return DrivingMode(Direction.SAME, LaneRelation.SAME_LANE,
                           longitudinal, Horizontal.NOT_APPLICABLE)
    horizontal = Horizontal.RIGHT if rel[1] >= 0.0 else Horizontal.LEFT
    return DrivingMode(Direction.SAME, LaneRelation.DIFFERENT_LANE,
                       Longitudinal.NOT_APPLICABLE, horizontal)


def assign_maneuver(mode: DrivingMode, is_intersection: bool,
                    rng: np.random.Generator) -> HazardousManeuver:
    """Maneuver-selection rule; the opposite-direction case turns around at
    intersections and otherwise flips a seeded coin between its two options."""
    if mode.direction is Direction.OPPOSITE:
        if is_intersection:
            return HazardousManeuver.U_TURN
        return (HazardousManeuver.LANE_ENCROACHMENT, HazardousManeuver.U_TURN)[
            int(rng.integers(2))]
    if mode.lane_relation is LaneRelation.SAME_LANE:
        return (HazardousManeuver.SUDDEN_BRAKE
                if mode.longitudinal is Longitudinal.FRONT
                else HazardousManeuver.OVERTAKE)
    return (HazardousManeuver.CUT_IN_LEFT
            if mode.horizontal is Horizontal.LEFT
            else HazardousManeuver.CUT_IN_RIGHT)


# ---------------------------------------------------------------------------
# scene message


@dataclass
class AgentSnapshot:
    """Pose/motion of one vehicle in the risky agent's frame."""

    position: tuple[float, float]
    heading: float
    speed: float
    yaw_rate: float = 0.0
    past: list[tuple[float, float]] = field(default_factory=list)  # oldest first


@dataclass
class SceneMessage:
    bev_png: bytes
    bev_scale: float            # m / pixel
    bev_size: tuple[int, int]   # (width, height) px
    fps: float
    ego: AgentSnapshot
    risky: AgentSnapshot
    neutrals: list[AgentSnapshot]
    risk_category: str          # position-category tag, e.g. "same_ahead"
    maneuver: str               # requested maneuver tag, e.g. "sudden-brake"
    is_intersection_hint: bool
    horizon: int
    base_trajectory: np.ndarray  # (N, 2), risky-agent frame
    lane_width: float = 3.5

    def to_document(self) -> dict:
        q = _quantize
        return {
            "version": SCENE_VERSION,
            "bev": {
                "png_base64": base64.b64encode(self.bev_png).decode("ascii"),
                "scale_m_per_px": self.bev_scale,
                "size_px": list(self.bev_size),
            },
            "fps": self.fps,
            "ego": _snapshot_doc(self.ego),
            "risky": _snapshot_doc(self.risky),
            "neutrals": [_snapshot_doc(s) for s in self.neutrals],
            "risk_category": self.risk_category,
            "maneuver": self.maneuver,
            "is_intersection_hint": self.is_intersection_hint,
            "horizon": self.horizon,
            "lane_width": self.lane_width,
            "base_trajectory": [[q(x), q(y)] for x, y in self.base_trajectory],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True)


def _quantize(x: float) -> float:
    return round(float(x), 3)


def _snapshot_doc(s: AgentSnapshot) -> dict:
    q = _quantize
    return {
        "position": [q(s.position[0]), q(s.position[1])],
        "heading": q(s.heading),
        "speed": q(s.speed),
        "yaw_rate": q(s.yaw_rate),
        "past": [[q(x), q(y)] for x, y in s.past],
    }


def _snapshot_from_doc(doc: dict) -> AgentSnapshot:
    return AgentSnapshot(
        position=(doc["position"][0], doc["position"][1]),
        heading=doc["heading"],
        speed=doc["speed"],
        yaw_rate=doc.get("yaw_rate", 0.0),
        past=[tuple(p) for p in doc.get("past", [])],
    )


def scene_from_json(text: str) -> SceneMessage:
    doc = json.loads(text)
    if doc.get("version") != SCENE_VERSION:
        raise ValueError(f"expected {SCENE_VERSION} document, got {doc.get('version')!r}")
    return SceneMessage(
        bev_png=base64.b64decode(doc["bev"]["png_base64"]),
        bev_scale=doc["bev"]["scale_m_per_px"],
        bev_size=tuple(doc["bev"]["size_px"]),
        fps=doc["fps"],
        ego=_snapshot_from_doc(doc["ego"]),
        risky=_snapshot_from_doc(doc["risky"]),
        neutrals=[_snapshot_from_doc(d) for d in doc["neutrals"]],
        risk_category=doc["risk_category"],
        maneuver=doc["maneuver"],
        is_intersection_hint=doc["is_intersection_hint"],
        horizon=doc["horizon"],
        lane_width=doc.get("lane_width", 3.5),
        base_trajectory=np.asarray(doc["base_trajectory"], dtype=float),
    )


def encode_scene(world: WorldState, risky_id: str, maneuver: HazardousManeuver,
                 mode: DrivingMode, base: Trajectory, bev_png: bytes,
                 bev_scale: float, bev_size: tuple[int, int],
                 history: dict[str, list[tuple[float, float]]] | None = None,
                 is_intersection: bool | None = None,
                 lane_width: float = 3.5) -> SceneMessage:
    """Pack the editor input; every coordinate is moved to the risky frame."""
    risky = world.agents[risky_id]
    origin = risky.position()
    heading = risky.heading
    history = history or {}

    def snap(vid: str, v: VehicleState) -> AgentSnapshot:
        pos = to_frame(v.position(), origin, heading)[0]
        past_world = history.get(vid, [])
        past = [tuple(p) for p in to_frame(np.asarray(past_world), origin, heading)] \
            if past_world else []
        return AgentSnapshot(
            position=(float(pos[0]), float(pos[1])),
            heading=wrap_angle(v.heading - heading),
            speed=v.speed,
            yaw_rate=v.yaw_rate,
            past=past,
        )

    if is_intersection is None:
        is_intersection = world.graph.in_intersection(world.ego.position())

    base_rel = base.to_agent_frame(origin, heading)
    if base_rel.n != base.n:
        raise AssertionError("frame change must preserve the point count")

    neutrals = [snap(aid, v) for aid, v in sorted(world.agents.items()) if aid != risky_id]
    return SceneMessage(
        bev_png=bev_png,
        bev_scale=bev_scale,
        bev_size=bev_size,
        fps=world.fps,
        ego=snap(EGO_ID, world.ego),
        risky=snap(risky_id, risky),
        neutrals=neutrals,
        risk_category=mode.position_category,
        maneuver=maneuver.value,
        is_intersection_hint=bool(is_intersection),
        horizon=base.n,
        lane_width=lane_width,
        base_trajectory=base_rel.points,
    )
