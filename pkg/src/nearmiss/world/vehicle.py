"""Vehicle state and the kinematic bicycle step."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..geometry import wrap_angle


@dataclass(frozen=True)
class BicycleParams:
    """Plant limits shared by simulation, tracking and feasibility checks."""

    wheelbase: float = 2.8          # m
    max_wheel_angle: float = math.radians(35.0)
    max_accel: float = 3.0          # m/s^2, throttle
    max_brake: float = 8.0          # m/s^2, braking
    max_speed: float = 16.7         # m/s

    @property
    def min_turn_radius(self) -> float:
        return self.wheelbase / math.tan(self.max_wheel_angle)


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0            # rad, from +x
    speed: float = 0.0              # m/s, >= 0
    yaw_rate: float = 0.0           # rad/s
    steering: float = 0.0           # normalized [-1, 1], positive = right
    accel_cmd: float = 0.0          # normalized [-1, 1]
    length: float = 4.5             # m
    width: float = 2.0              # m
    lane_id: str | None = None
    arc_pos: float = 0.0            # m along lane_id's centerline

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def velocity(self) -> np.ndarray:
        return self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])

    def copy(self) -> "VehicleState":
        return replace(self)


def step_vehicle(v: VehicleState, steer: float, accel: float, dt: float,
                 params: BicycleParams = BicycleParams()) -> VehicleState:
    """One kinematic bicycle step. Inputs are clamped, speed never goes negative.

    Positive steer turns toward the right-normal side of the heading (heading
    increases), matching the package-wide sign convention.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    steer = min(max(float(steer), -1.0), 1.0)
    accel = min(max(float(accel), -1.0), 1.0)

    a = accel * (params.max_accel if accel >= 0.0 else params.max_brake)
    new_speed = min(max(v.speed + a * dt, 0.0), params.max_speed)

    delta = steer * params.max_wheel_angle
    new_heading = v.heading + (v.speed / params.wheelbase) * math.tan(delta) * dt
    yaw_rate = (new_heading - v.heading) / dt
    new_heading = wrap_angle(new_heading)

    out = v.copy()
    out.x = v.x + v.speed * math.cos(new_heading) * dt
    out.y = v.y + v.speed * math.sin(new_heading) * dt
    out.heading = new_heading
    out.speed = new_speed
    out.yaw_rate = yaw_rate
    out.steering = steer
    out.accel_cmd = accel
    return out
