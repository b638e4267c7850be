from __future__ import annotations

import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from nearmiss.world.collision import detect_collisions, obb_corners, obb_overlap
from nearmiss.world.vehicle import VehicleState


def _veh(x, y, heading=0.0, speed=0.0, length=4.5, width=2.0):
    return VehicleState(x=x, y=y, heading=heading, speed=speed,
                        length=length, width=width)


def test_far_apart_no_collision():
    out = detect_collisions({"a": _veh(0, 0), "b": _veh(10, 0)})
    assert out == []


def test_identical_pose_collides():
    out = detect_collisions({"a": _veh(0, 0, speed=3.0), "b": _veh(0, 0)})
    assert len(out) == 1
    a, b, rel = out[0]
    assert (a, b) == ("a", "b")
    assert rel == pytest.approx(3.0)


def test_relative_speed_is_vector_difference():
    va = _veh(0, 0, heading=0.0, speed=4.0)
    vb = _veh(1.0, 0.5, heading=math.pi, speed=3.0)
    out = detect_collisions({"a": va, "b": vb})
    assert out[0][2] == pytest.approx(7.0)


def test_symmetry():
    va, vb = _veh(0, 0, heading=0.3), _veh(3.0, 1.0, heading=1.2)
    assert obb_overlap(va, vb) == obb_overlap(vb, va)


def test_sat_matches_polygon_oracle_fuzz():
    rng = np.random.default_rng(11)
    disagreements = 0
    for _ in range(10_000):
        va = _veh(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)),
                  float(rng.uniform(-math.pi, math.pi)))
        vb = _veh(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)),
                  float(rng.uniform(-math.pi, math.pi)))
        ours = obb_overlap(va, vb)
        pa = Polygon(obb_corners(va))
        pb = Polygon(obb_corners(vb))
        oracle = pa.intersects(pb)
        if ours != oracle:
            # tolerate exact-touch disagreements only
            dist = pa.distance(pb)
            if dist > 1e-9:
                disagreements += 1
    assert disagreements == 0


def test_corner_touch_at_45_degrees():
    va = _veh(0, 0, heading=0.0, length=4.0, width=2.0)
    # corner of A at (2, 1); rotate B by 45 deg, put its corner on top
    vb = _veh(2 + 1.5 * math.sqrt(2), 1 + 1.5 * math.sqrt(2) - 1e-6,
              heading=math.pi / 4, length=4.0, width=2.0)
    pa = Polygon(obb_corners(va))
    pb = Polygon(obb_corners(vb))
    assert obb_overlap(va, vb) == pa.intersects(pb)
