from __future__ import annotations

import math

import numpy as np
import pytest

from nearmiss.trajgen import (
    Frame,
    Stage,
    Trajectory,
    ctrv_points,
    ctrv_predict,
    fuse_linear,
    map_waypoint_traj,
    trajectory_from_record,
)
from nearmiss.world.vehicle import VehicleState


def euler_ctrv(x, y, heading, speed, yaw_rate, n, dt, substeps=1000):
    """Independent oracle: fine-step forward integration of the same motion."""
    h = dt / substeps
    out = np.empty((n, 2))
    th = heading
    px, py = x, y
    for i in range(n):
        for _ in range(substeps):
            px += speed * math.cos(th) * h
            py += speed * math.sin(th) * h
            th += yaw_rate * h
        out[i] = (px, py)
    return out


def test_straight_line_endpoint_exact():
    t = ctrv_predict(VehicleState(speed=10.0, heading=0.0), 15, 1.0 / 15.0)
    assert t.points[-1][0] == pytest.approx(10.0, abs=1e-12)
    assert t.points[-1][1] == 0.0


def test_circle_radius_constant():
    r = 12.0
    v = 6.0
    omega = v / r
    pts = ctrv_points(0.0, 0.0, 0.5, v, omega, 50, 0.05)
    # turn center for omega > 0 sits at (x - R sin(th), y + R cos(th))
    center = np.array([0.0 - r * math.sin(0.5), 0.0 + r * math.cos(0.5)])
    dists = np.linalg.norm(pts - center, axis=1)
    assert np.allclose(dists, r, atol=1e-9)


def test_ctrv_matches_fine_euler_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        x, y = rng.uniform(-50, 50, 2)
        heading = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(0, 16.0)
        # keep lateral acceleration plausible so the oracle's own O(h) bias
        # stays well under the tolerance
        yaw = float(np.clip(rng.uniform(-8.0, 8.0) / max(speed, 1.0), -1.0, 1.0))
        n, dt = 45, 1.0 / 15.0
        ours = ctrv_points(float(x), float(y), float(heading), float(speed), float(yaw), n, dt)
        oracle = euler_ctrv(float(x), float(y), float(heading), float(speed), float(yaw),
                            n, dt, substeps=1000)
        assert np.abs(ours - oracle).max() < 1e-3


def test_ctrv_mirror_property():
    pts_fwd = ctrv_points(2.0, 1.0, 0.8, 7.0, 0.4, 30, 1 / 15)
    pts_bwd = ctrv_points(2.0, 1.0, 0.8, -7.0, 0.4, 30, 1 / 15)
    start = np.array([2.0, 1.0])
    assert np.abs((pts_bwd - start) + (pts_fwd - start)).max() < 1e-9


def test_ctrv_branch_continuity_at_eps():
    lo = ctrv_points(0, 0, 0.3, 10.0, 0.99e-6, 45, 1 / 15)
    hi = ctrv_points(0, 0, 0.3, 10.0, 1.01e-6, 45, 1 / 15)
    assert np.abs(lo - hi).max() < 1e-3


def test_ctrv_accurate_around_branch_switch():
    # the straight-line branch must stay within 1e-3 m of the true motion
    for yaw in (1e-7, 5e-7, 2e-6, 1e-5, 1e-4):
        ours = ctrv_points(0, 0, 0.3, 16.7, yaw, 45, 1 / 15)
        oracle = euler_ctrv(0, 0, 0.3, 16.7, yaw, 45, 1 / 15, substeps=200)
        assert np.abs(ours - oracle).max() < 1e-3


def test_map_traj_spacing(straight_map):
    v = VehicleState(x=0.0, y=0.0, heading=0.0, speed=7.5, lane_id="l0", arc_pos=0.0)
    t = map_waypoint_traj(v, straight_map, 10, 1.0 / 15.0)
    assert np.allclose(t.points[:, 0], 0.5 * np.arange(1, 11), atol=1e-9)
    assert np.allclose(t.points[:, 1], 0.0)


def test_map_traj_snaps_to_centerline(straight_map):
    v = VehicleState(x=10.0, y=-1.0, heading=0.0, speed=7.5, lane_id="l0", arc_pos=10.0)
    t = map_waypoint_traj(v, straight_map, 5, 1.0 / 15.0)
    assert np.allclose(t.points[:, 1], 0.0, atol=1e-12)


def test_map_traj_follows_curve(cross_map):
    lane = cross_map.lanes["e_w"]  # straight connector; also try a turning one
    turn = cross_map.lanes["e_n"]
    v = VehicleState(x=float(turn.centerline[0][0]), y=float(turn.centerline[0][1]),
                     heading=turn.heading_at(0.0), speed=6.0, lane_id="e_n", arc_pos=0.0)
    t = map_waypoint_traj(v, cross_map, 20, 1.0 / 15.0)
    # all points within 1e-6 of the lane polyline (or its successor)
    from nearmiss.geometry import project_to_polyline

    chain = np.vstack([turn.centerline,
                       cross_map.lanes[turn.successors[0]].centerline])
    for p in t.points:
        _, lat, _, _ = project_to_polyline(p, chain)
        assert abs(lat) < 1e-6


def test_map_traj_extrapolates_past_dead_end(straight_map):
    lane = straight_map.lanes["l0"]
    v = VehicleState(x=198.0, y=0.0, heading=0.0, speed=7.5, lane_id="l0", arc_pos=198.0)
    t = map_waypoint_traj(v, straight_map, 10, 1.0 / 15.0)
    assert t.points[-1][0] > 200.0
    assert np.allclose(t.points[:, 1], 0.0, atol=1e-12)


def test_fuse_requires_matching_inputs():
    a = Trajectory(Stage.MODEL, np.zeros((5, 2)), 0.1)
    b = Trajectory(Stage.MAP, np.zeros((6, 2)), 0.1)
    with pytest.raises(ValueError):
        fuse_linear(a, b)
    c = Trajectory(Stage.MAP, np.zeros((5, 2)), 0.1, frame=Frame.AGENT)
    with pytest.raises(ValueError):
        fuse_linear(a, c)


def test_fuse_identity_when_equal():
    pts = np.random.default_rng(0).normal(size=(8, 2))
    a = Trajectory(Stage.MODEL, pts, 0.1)
    b = Trajectory(Stage.MAP, pts.copy(), 0.1)
    out = fuse_linear(a, b)
    assert np.array_equal(out.points, pts)


def test_fuse_endpoint_equals_map_exactly():
    rng = np.random.default_rng(1)
    a = Trajectory(Stage.MODEL, rng.normal(size=(12, 2)), 0.1)
    b = Trajectory(Stage.MAP, rng.normal(size=(12, 2)), 0.1)
    out = fuse_linear(a, b)
    assert np.array_equal(out.points[-1], b.points[-1])


def test_fuse_table_matches_direct_evaluation():
    # model straight +x, map straight +y, N=4: hand-evaluated blend table
    model = Trajectory(Stage.MODEL, np.array([[1.0, 0], [2.0, 0], [3.0, 0], [4.0, 0]]), 0.1)
    map_t = Trajectory(Stage.MAP, np.array([[0, 1.0], [0, 2.0], [0, 3.0], [0, 4.0]]), 0.1)
    out = fuse_linear(model, map_t)
    expected = np.array([
        [0.75 * 1.0, 0.25 * 1.0],
        [0.50 * 2.0, 0.50 * 2.0],
        [0.25 * 3.0, 0.75 * 3.0],
        [0.00 * 4.0, 1.00 * 4.0],
    ])
    assert np.allclose(out.points, expected, atol=1e-15)


def test_fuse_output_inside_bounding_box():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a = rng.normal(scale=20, size=(10, 2))
        b = rng.normal(scale=20, size=(10, 2))
        out = fuse_linear(Trajectory(Stage.MODEL, a, 0.1),
                          Trajectory(Stage.MAP, b, 0.1)).points
        lo = np.minimum(a, b) - 1e-12
        hi = np.maximum(a, b) + 1e-12
        assert np.all(out >= lo) and np.all(out <= hi)


def test_model_weight_strictly_decreasing():
    n = 17
    w = 1.0 - np.arange(1, n + 1) / n
    assert w[0] == pytest.approx((n - 1) / n)
    assert w[-1] == 0.0
    assert np.all(np.diff(w) < 0)


def test_trajectory_record_roundtrip():
    t = Trajectory(Stage.BASE, np.array([[1.23456, -2.34567], [3.0, 4.0]]), 1 / 15,
                   frame=Frame.AGENT)
    rec = t.to_record()
    back = trajectory_from_record(rec)
    assert back.stage is Stage.BASE
    assert back.frame is Frame.AGENT
    assert np.abs(back.points - t.points).max() <= 5e-4  # 3-decimal quantization


def test_stage_order_enforced():
    t = Trajectory(Stage.CURVE, np.zeros((4, 2)), 0.1)
    with pytest.raises(ValueError):
        t.derive(Stage.BASE, np.ones((4, 2)))
