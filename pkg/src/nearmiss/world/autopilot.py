"""Neutral-vehicle controller: pure-pursuit steering plus a front-gap law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import to_frame
from .routing import Route
from .vehicle import BicycleParams, VehicleState


@dataclass(frozen=True)
class AutopilotParams:
    cruise_speed: float = 7.0       # m/s, overridden per vehicle at spawn
    lookahead_gain: float = 0.6     # s of travel ahead
    lookahead_min: float = 3.0      # m
    lookahead_max: float = 12.0     # m
    gap_stop: float = 4.0           # m bumper gap forcing full brake
    gap_headway: float = 1.2        # s, speed-dependent slack on top of gap_stop
    speed_gain: float = 0.8         # throttle per m/s of speed error
    sensing_range: float = 50.0     # m


def find_leader(v: VehicleState, others: list[VehicleState],
                params: AutopilotParams = AutopilotParams()) -> tuple[VehicleState | None, float]:
    """Nearest vehicle ahead in the own travel corridor; returns (leader, bumper gap)."""
    best: VehicleState | None = None
    best_gap = math.inf
    for o in others:
        rel = to_frame(o.position(), v.position(), v.heading)[0]
        if rel[0] <= 0.0 or rel[0] > params.sensing_range:
            continue
        if abs(rel[1]) > (v.width + o.width) / 2.0 + 0.5:
            continue
        gap = rel[0] - (v.length + o.length) / 2.0
        if gap < best_gap:
            best, best_gap = o, gap
    return best, best_gap


def autopilot_control(v: VehicleState, route: Route, others: list[VehicleState],
                      params: AutopilotParams = AutopilotParams(),
                      plant: BicycleParams = BicycleParams()) -> tuple[float, float]:
    """(steer, accel) in [-1, 1] tracking the route at cruise speed."""
    lookahead = min(max(params.lookahead_gain * v.speed, params.lookahead_min),
                    params.lookahead_max)
    progress = route.progress(v.position())
    target_arc = min(progress + lookahead, route.length)
    target = route.waypoints[int(np.argmin(np.abs(route.arcs - target_arc)))]
    rel = to_frame(target, v.position(), v.heading)[0]
    dist = float(np.hypot(rel[0], rel[1]))
    if dist < 1e-6:
        steer = 0.0
    else:
        alpha = math.atan2(rel[1], rel[0])
        delta = math.atan2(2.0 * plant.wheelbase * math.sin(alpha), dist)
        steer = min(max(delta / plant.max_wheel_angle, -1.0), 1.0)

    leader, gap = find_leader(v, others, params)
    danger = params.gap_stop + params.gap_headway * v.speed
    if leader is not None and gap < params.gap_stop:
        accel = -1.0
    elif leader is not None and gap < danger:
        # ease off proportionally inside the headway band
        accel = -min(1.0, (danger - gap) / max(danger - params.gap_stop, 1e-6))
    else:
        remaining = route.length - progress
        target_speed = params.cruise_speed
        if remaining < v.speed * v.speed / (2.0 * 0.6 * plant.max_brake) + 2.0:
            target_speed = 0.0      # run out of road: stop at the end
        accel = min(max(params.speed_gain * (target_speed - v.speed), -1.0), 1.0)
    return steer, accel
