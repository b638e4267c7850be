"""Training reward: style x weights + car-following + proximity penalty.

Total per step: alpha * style + beta * follow - gamma_safe * penalty, where
the follow term only applies when a same-lane front vehicle is within sensing
range. Collisions and leaving the road subtract a terminal penalty and end
the episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle
from .world.autopilot import AutopilotParams, find_leader
from .world.state import EGO_ID, WorldState, lane_metrics


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 1.0
    beta: float = 0.5
    gamma_safe: float = 0.5
    v_min: float = 2.0              # m/s
    v_target: float = 6.0
    v_max: float = 9.0
    max_angle: float = math.radians(60.0)
    stability_sigma: float = 0.3    # m, lateral-variance reference
    stability_window: int = 15      # steps
    d_danger: float = 4.0           # m
    d_min_follow: float = 6.0
    t_headway: float = 1.2          # s
    follow_range: float = 50.0      # m, sensing range for the follow term
    safety_threshold: float = 4.0   # m
    safety_eps: float = 0.1
    collision_penalty: float = 10.0
    offroad_penalty: float = 10.0

    def __post_init__(self) -> None:
        if not (self.v_min < self.v_target < self.v_max):
            raise ValueError("need v_min < v_target < v_max")
        if not self.d_danger < self.d_min_follow:
            raise ValueError("need d_danger < d_min_follow")
        if self.safety_threshold <= 0:
            raise ValueError("safety_threshold must be positive")

    def d_opt(self, v: float) -> float:
        return self.d_min_follow + self.t_headway * v


@dataclass
class RewardBreakdown:
    r_speed: float
    r_center: float
    r_angle: float
    r_stable: float
    style: float
    follow: float           # 0 when no front vehicle applies
    follow_applied: bool
    safety_penalty: float
    terminal_penalty: float
    total: float


def r_speed(v: float, w: RewardWeights) -> float:
    """Trapezoid: 0 at rest, 1 on [v_min, v_target], back to 0 at v_max."""
    if v <= 0.0 or v >= w.v_max:
        return 0.0
    if v < w.v_min:
        return v / w.v_min
    if v <= w.v_target:
        return 1.0
    return (w.v_max - v) / (w.v_max - w.v_target)


def r_center(lateral_offset: float, half_width: float) -> float:
    return max(0.0, 1.0 - abs(lateral_offset) / half_width)


def r_angle(heading_error: float, max_angle: float) -> float:
    return max(0.0, 1.0 - abs(wrap_angle(heading_error)) / max_angle)


def r_stable(lateral_history, sigma_ref: float = 0.3) -> float:
    """exp(-var/sigma^2) over the recent lateral offsets; empty history is 1."""
    hist = np.asarray(list(lateral_history), dtype=float)
    if hist.size == 0:
        return 1.0
    return float(math.exp(-np.var(hist) / (sigma_ref * sigma_ref)))


def style_reward(speed_r: float, center_r: float, angle_r: float, stable_r: float) -> float:
    return speed_r * center_r * angle_r * stable_r


def follow_reward(d: float, v: float, w: RewardWeights) -> float:
    """Two branches meeting at d_opt(v) with value 1; see RewardWeights."""
    if d <= 0.0:
        raise ValueError("distance must be positive")
    d_opt = w.d_opt(v)
    if d <= d_opt:
        return min(max((d - w.d_danger) / (d_opt - w.d_danger), 0.0), 1.0)
    return d_opt / d


def safety_penalty(min_dist: float, w: RewardWeights) -> float:
    if min_dist >= w.safety_threshold:
        return 0.0
    return w.safety_threshold / max(min_dist, w.safety_eps) - 1.0


def total_reward(world: WorldState, route, lateral_history,
                 w: RewardWeights = RewardWeights(),
                 autopilot: AutopilotParams = AutopilotParams()) -> tuple[RewardBreakdown, bool]:
    """Reward for the ego's current state; returns (breakdown, terminal flag)."""
    metrics = lane_metrics(world.ego, world.graph)
    lane = world.graph.lanes[metrics.lane_id]
    half_width = lane.width / 2.0

    speed_r = r_speed(world.ego.speed, w)
    center_r = r_center(metrics.lateral_offset, half_width)
    angle_r = r_angle(metrics.heading_error, w.max_angle)
    stable_r = r_stable(lateral_history, w.stability_sigma)
    style = style_reward(speed_r, center_r, angle_r, stable_r)

    others = [v for aid, v in sorted(world.agents.items())]
    leader_params = AutopilotParams(
        sensing_range=w.follow_range,
        gap_stop=autopilot.gap_stop, gap_headway=autopilot.gap_headway)
    leader, gap = find_leader(world.ego, others, leader_params)
    follow_applied = leader is not None and gap > 0.0
    follow = follow_reward(gap, world.ego.speed, w) if follow_applied else 0.0

    min_dist = math.inf
    ego_pos = world.ego.position()
    for v in others:
        min_dist = min(min_dist, float(np.linalg.norm(v.position() - ego_pos)))
    penalty = safety_penalty(min_dist, w) if math.isfinite(min_dist) else 0.0

    total = w.alpha * style + (w.beta * follow if follow_applied else 0.0) \
        - w.gamma_safe * penalty

    terminal = False
    terminal_penalty = 0.0
    collisions = world.collisions()
    if any(EGO_ID in (a, b) for a, b, _ in collisions):
        terminal = True
        terminal_penalty += w.collision_penalty
    if abs(metrics.lateral_offset) > 2.0 * half_width:
        terminal = True
        terminal_penalty += w.offroad_penalty
    if route is not None and route.length > 0:
        if route.progress(ego_pos) >= route.length - 1e-6:
            terminal = True
    total -= terminal_penalty

    return RewardBreakdown(
        r_speed=speed_r, r_center=center_r, r_angle=angle_r, r_stable=stable_r,
        style=style, follow=follow, follow_applied=follow_applied,
        safety_penalty=penalty, terminal_penalty=terminal_penalty, total=total,
    ), terminal
