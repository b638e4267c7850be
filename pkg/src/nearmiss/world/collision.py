"""Oriented-bounding-box collision tests (separating axis theorem)."""

from __future__ import annotations

import math

import numpy as np

from .vehicle import VehicleState


def obb_corners(v: VehicleState) -> np.ndarray:
    """Footprint corners in world frame, from the center pose."""
    c, s = math.cos(v.heading), math.sin(v.heading)
    fwd = np.array([c, s]) * (v.length / 2.0)
    side = np.array([-s, c]) * (v.width / 2.0)
    center = v.position()
    return np.array([center + fwd + side, center + fwd - side,
                     center - fwd - side, center - fwd + side])


def obb_overlap(a: VehicleState, b: VehicleState) -> bool:
    """SAT test for two oriented rectangles; touching counts as overlap."""
    ca, cb = obb_corners(a), obb_corners(b)
    for veh in (a, b):
        c, s = math.cos(veh.heading), math.sin(veh.heading)
        for axis in (np.array([c, s]), np.array([-s, c])):
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def detect_collisions(vehicles: dict[str, VehicleState]) -> list[tuple[str, str, float]]:
    """All overlapping pairs as (id_a, id_b, relative speed magnitude), id_a < id_b."""
    out = []
    ids = sorted(vehicles)
    for i, ia in enumerate(ids):
        for ib in ids[i + 1:]:
            va, vb = vehicles[ia], vehicles[ib]
            if np.linalg.norm(va.position() - vb.position()) > (va.length + vb.length):
                continue
            if obb_overlap(va, vb):
                rel = float(np.linalg.norm(va.velocity() - vb.velocity()))
                out.append((ia, ib, rel))
    return out
