"""Fixed-width vector observation for the driving policy.

Layout (dimension 49):
  [0:3]    ego steering, ego accel command, ego speed / plant max speed
  [3:33]   15 upcoming route waypoints in the ego frame, / 50 m
  [33:49]  4 nearest vehicles: rel x / 50, rel y / 50, rel vx, rel vy
           (velocities / twice the plant max speed). Absent slots read
           position (1, 1) and zero velocity.
Everything is clamped to [-1, 1].
"""

from __future__ import annotations

import numpy as np

from ..geometry import rot_matrix
from ..world.routing import Route, upcoming_waypoints
from ..world.state import WorldState

N_WAYPOINTS = 15
N_NEIGHBORS = 4
POSITION_NORM = 50.0  # m
OBS_DIM = 3 + 2 * N_WAYPOINTS + 4 * N_NEIGHBORS


def build_observation(world: WorldState, route: Route) -> np.ndarray:
    ego = world.ego
    v_norm = world.plant.max_speed
    out = np.empty(OBS_DIM)
    out[0] = ego.steering
    out[1] = ego.accel_cmd
    out[2] = ego.speed / v_norm

    wps = upcoming_waypoints(route, ego, N_WAYPOINTS) / POSITION_NORM
    out[3:3 + 2 * N_WAYPOINTS] = wps.ravel()

    rot = rot_matrix(ego.heading)
    ego_vel = ego.velocity()
    feats = []
    for aid in sorted(world.agents):
        a = world.agents[aid]
        rel_p = (a.position() - ego.position()) @ rot
        rel_v = (a.velocity() - ego_vel) @ rot
        feats.append((float(np.linalg.norm(rel_p)), aid, rel_p, rel_v))
    feats.sort(key=lambda f: (f[0], f[1]))
    block = np.tile(np.array([1.0, 1.0, 0.0, 0.0]), (N_NEIGHBORS, 1))
    for k, (_, _, rel_p, rel_v) in enumerate(feats[:N_NEIGHBORS]):
        block[k, 0:2] = rel_p / POSITION_NORM
        block[k, 2:4] = rel_v / (2.0 * v_norm)
    out[3 + 2 * N_WAYPOINTS:] = block.ravel()
    return np.clip(out, -1.0, 1.0)
