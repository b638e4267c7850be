from __future__ import annotations

import math

import numpy as np
import pytest

from nearmiss.reward import (
    RewardWeights,
    follow_reward,
    r_angle,
    r_center,
    r_speed,
    r_stable,
    safety_penalty,
    style_reward,
    total_reward,
)
from nearmiss.world.routing import plan_route
from nearmiss.world.state import WorldState
from nearmiss.world.vehicle import VehicleState

W = RewardWeights()


def test_r_speed_shape():
    assert r_speed(W.v_target, W) == 1.0
    assert r_speed(0.0, W) == 0.0
    assert r_speed(W.v_max, W) == 0.0
    assert r_speed(W.v_max + 3.0, W) == 0.0
    assert r_speed((W.v_target + W.v_max) / 2.0, W) == pytest.approx(0.5)
    assert r_speed(W.v_min / 2.0, W) == pytest.approx(0.5)


def test_r_center_shape():
    assert r_center(0.0, 1.75) == 1.0
    assert r_center(1.75, 1.75) == 0.0
    assert r_center(-1.75, 1.75) == 0.0
    assert r_center(0.875, 1.75) == pytest.approx(0.5)
    assert r_center(5.0, 1.75) == 0.0


def test_r_angle_shape_and_wrap():
    assert r_angle(0.0, W.max_angle) == 1.0
    assert r_angle(W.max_angle, W.max_angle) == 0.0
    assert r_angle(2.0 * math.pi, W.max_angle) == pytest.approx(1.0)
    assert r_angle(-W.max_angle / 2, W.max_angle) == pytest.approx(0.5)


def test_r_stable_cases():
    assert r_stable([0.4] * 10) == 1.0
    assert r_stable([]) == 1.0
    alternating = [0.3, -0.3] * 8
    # variance of the +-0.3 sequence is 0.09 = sigma_ref^2 -> exp(-1)
    assert r_stable(alternating, sigma_ref=0.3) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_style_product():
    assert style_reward(1, 1, 1, 1) == 1
    assert style_reward(0, 1, 1, 1) == 0
    assert style_reward(0.5, 0.5, 1, 1) == pytest.approx(0.25)


def test_follow_boundary_continuity():
    for v in (0.0, 3.0, 6.0, 12.0):
        d_opt = W.d_opt(v)
        lo = follow_reward(d_opt - 1e-9, v, W)
        hi = follow_reward(d_opt + 1e-9, v, W)
        assert abs(lo - hi) <= 1e-9
        assert follow_reward(d_opt, v, W) == 1.0


def test_follow_branches():
    v = 6.0
    assert follow_reward(W.d_danger, v, W) == 0.0
    assert follow_reward(W.d_danger / 2.0, v, W) == 0.0
    assert follow_reward(2.0 * W.d_opt(v), v, W) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        follow_reward(0.0, v, W)


def test_follow_strictly_decreasing_beyond_opt():
    v = 5.0
    ds = np.linspace(W.d_opt(v), W.d_opt(v) * 5, 50)
    vals = [follow_reward(float(d), v, W) for d in ds]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_safety_penalty_shape():
    assert safety_penalty(W.safety_threshold, W) == 0.0
    assert safety_penalty(W.safety_threshold * 2, W) == 0.0
    assert safety_penalty(W.safety_threshold / 2.0, W) == pytest.approx(1.0)
    cap = W.safety_threshold / W.safety_eps - 1.0
    assert safety_penalty(0.0, W) == pytest.approx(cap)
    assert safety_penalty(-1.0, W) <= cap


def test_fuzzed_factors_in_unit_interval():
    rng = np.random.default_rng(17)
    n = 100_000
    speeds = rng.uniform(0, 30, n)
    offsets = rng.uniform(-10, 10, n)
    angles = rng.uniform(-10, 10, n)
    svals = np.fromiter((r_speed(v, W) for v in speeds), dtype=float, count=n)
    cvals = np.fromiter((r_center(o, 1.75) for o in offsets), dtype=float, count=n)
    avals = np.fromiter((r_angle(a, W.max_angle) for a in angles), dtype=float, count=n)
    for vals in (svals, cvals, avals):
        assert vals.min() >= 0.0 and vals.max() <= 1.0
    styles = svals * cvals * avals
    assert styles.min() >= 0.0 and styles.max() <= 1.0
    assert np.all(styles <= np.minimum(np.minimum(svals, cvals), avals))


def _ideal_world(straight_map):
    ego = VehicleState(x=50.0, y=0.0, heading=0.0, speed=W.v_target)
    w = WorldState(graph=straight_map, ego=ego)
    w.localize_all()
    return w


def test_total_style_only(straight_map):
    w = _ideal_world(straight_map)
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    breakdown, terminal = total_reward(w, route, [], W)
    assert not terminal
    assert breakdown.style == pytest.approx(1.0)
    assert not breakdown.follow_applied
    assert breakdown.safety_penalty == 0.0
    assert breakdown.total == pytest.approx(W.alpha * 1.0)


def test_total_with_front_vehicle_at_opt(straight_map):
    w = _ideal_world(straight_map)
    d_opt = W.d_opt(W.v_target)
    center_dist = d_opt + 4.5  # bumper gap == d_opt
    w.agents["a"] = VehicleState(x=50.0 + center_dist, y=0.0, heading=0.0,
                                 speed=W.v_target)
    w.localize_all()
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    breakdown, _ = total_reward(w, route, [], W)
    assert breakdown.follow_applied
    assert breakdown.follow == pytest.approx(1.0, abs=1e-9)
    expected = W.alpha * breakdown.style + W.beta * 1.0 - W.gamma_safe * breakdown.safety_penalty
    assert breakdown.total == pytest.approx(expected)


def test_total_collision_terminal(straight_map):
    w = _ideal_world(straight_map)
    w.agents["a"] = VehicleState(x=50.5, y=0.0, heading=0.0, speed=0.0)
    w.localize_all()
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    breakdown, terminal = total_reward(w, route, [], W)
    assert terminal
    assert breakdown.terminal_penalty >= W.collision_penalty
    assert breakdown.total < 0.0


def test_total_offroad_terminal(straight_map):
    ego = VehicleState(x=50.0, y=-4.0, heading=0.0, speed=W.v_target)
    w = WorldState(graph=straight_map, ego=ego)
    w.localize_all()
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    breakdown, terminal = total_reward(w, route, [], W)
    assert terminal
    assert breakdown.terminal_penalty >= W.offroad_penalty


def test_total_linear_in_weights(straight_map):
    w = _ideal_world(straight_map)
    w.agents["a"] = VehicleState(x=58.0, y=0.0, heading=0.0, speed=3.0)
    w.agents["b"] = VehicleState(x=50.0, y=3.3, heading=0.0, speed=3.0)
    w.localize_all()
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    rng = np.random.default_rng(23)
    base, _ = total_reward(w, route, [0.1, -0.2], W)
    for _ in range(20):
        alpha, beta, gamma = rng.uniform(0.0, 3.0, 3)
        w2 = RewardWeights(alpha=float(alpha), beta=float(beta), gamma_safe=float(gamma))
        out, _ = total_reward(w, route, [0.1, -0.2], w2)
        expected = (alpha * base.style + (beta * base.follow if base.follow_applied else 0.0)
                    - gamma * base.safety_penalty - base.terminal_penalty)
        assert out.total == pytest.approx(expected, abs=1e-12)


def test_total_pure_function(straight_map):
    w = _ideal_world(straight_map)
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    a, _ = total_reward(w, route, [0.0, 0.1], W)
    b, _ = total_reward(w, route, [0.0, 0.1], W)
    assert a == b


def test_breakdown_fields_finite_under_fuzz(straight_map):
    rng = np.random.default_rng(31)
    route = plan_route(straight_map, np.array([0.0, 0.0]), np.array([190.0, 0.0]))
    for _ in range(200):
        ego = VehicleState(x=float(rng.uniform(0, 200)), y=float(rng.uniform(-8, 12)),
                           heading=float(rng.uniform(-math.pi, math.pi)),
                           speed=float(rng.uniform(0, 16.7)))
        w = WorldState(graph=straight_map, ego=ego)
        if rng.random() < 0.7:
            w.agents["a"] = VehicleState(x=float(rng.uniform(0, 200)),
                                         y=float(rng.uniform(-8, 12)),
                                         heading=float(rng.uniform(-math.pi, math.pi)),
                                         speed=float(rng.uniform(0, 16.7)))
        w.localize_all()
        history = rng.normal(scale=0.5, size=int(rng.integers(0, 15)))
        breakdown, _ = total_reward(w, route, history, W)
        vals = [breakdown.r_speed, breakdown.r_center, breakdown.r_angle,
                breakdown.r_stable, breakdown.style, breakdown.follow,
                breakdown.safety_penalty, breakdown.total]
        assert all(math.isfinite(v) for v in vals)
        for v in (breakdown.r_speed, breakdown.r_center, breakdown.r_angle,
                  breakdown.r_stable, breakdown.style, breakdown.follow):
            assert 0.0 <= v <= 1.0
        assert breakdown.safety_penalty >= 0.0
