from __future__ import annotations

import numpy as np
import pytest

from nearmiss.world.autopilot import autopilot_control, find_leader
from nearmiss.world.routing import plan_route
from nearmiss.world.vehicle import VehicleState


@pytest.fixture()
def route(straight_map):
    return plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))


def test_centered_no_leader(route):
    v = VehicleState(x=20.0, y=0.0, heading=0.0, speed=3.0)
    steer, accel = autopilot_control(v, route, [])
    assert abs(steer) < 0.05
    assert accel > 0.0  # toward cruise speed


def test_stopped_leader_close_ahead_full_brake(route):
    v = VehicleState(x=20.0, y=0.0, heading=0.0, speed=6.0)
    leader = VehicleState(x=25.0, y=0.0, heading=0.0, speed=0.0)
    steer, accel = autopilot_control(v, route, [leader])
    assert accel == -1.0


def test_offset_left_steers_right(route):
    # 1 m left of centerline (left is -y); positive steer turns right
    v = VehicleState(x=20.0, y=-1.0, heading=0.0, speed=5.0)
    steer, _ = autopilot_control(v, route, [])
    assert steer > 0.0


def test_leader_selection_nearest_in_corridor():
    v = VehicleState(x=0.0, y=0.0, heading=0.0, speed=5.0)
    near = VehicleState(x=12.0, y=0.3, heading=0.0)
    far = VehicleState(x=30.0, y=0.0, heading=0.0)
    off_lane = VehicleState(x=6.0, y=4.0, heading=0.0)
    leader, gap = find_leader(v, [far, near, off_lane])
    assert leader is near
    assert gap == pytest.approx(12.0 - 4.5)


def test_outputs_clamped(route):
    v = VehicleState(x=20.0, y=-3.0, heading=1.2, speed=0.0)
    steer, accel = autopilot_control(v, route, [])
    assert -1.0 <= steer <= 1.0
    assert -1.0 <= accel <= 1.0
