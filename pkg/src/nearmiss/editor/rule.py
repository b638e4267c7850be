"""Deterministic offline editor implementing the six hazardous maneuvers.

All geometry is in the risky agent's frame (agent at the origin, heading +x
at t = 0). Every template reshapes the base trajectory, starts near its first
point, and returns exactly N finite waypoints. Magnitudes (speed-up factor,
crossing time, drift width) are parameters of this module, not of the editing
protocol.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ..geometry import polyline_arclength, resample_polyline
from .base import Editor, EditorRequest, EditorResponse, fallback_response, validate_response


@dataclass(frozen=True)
class RuleEditorParams:
    brake_residual_max: float = 0.2     # fraction of initial speed left at mid-horizon
    overtake_speedup: float = 1.3
    overtake_margin: float = 7.0        # m ahead of ego when merging back
    cutin_cross_fraction: float = 0.6   # fraction of the horizon at the crossing point
    encroach_fraction: float = 0.5      # of lane width, drift across the centerline
    min_turn_radius: float = 2.8 / math.tan(math.radians(35.0))
    turn_radius_margin: float = 1.05
    turn_completion_fraction: float = 0.7  # of the horizon by which the turn is done
    max_speed: float = 16.7


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _request_rng(req: EditorRequest, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(
        (req.scene.to_json() + f"|{req.maneuver}|{seed}").encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


class RuleBasedEditor(Editor):
    name = "rule"

    def __init__(self, params: RuleEditorParams = RuleEditorParams(), seed: int = 0):
        self.params = params
        self.seed = seed

    def edit(self, req: EditorRequest) -> EditorResponse:
        rng = _request_rng(req, self.seed)
        base = np.asarray(req.scene.base_trajectory, dtype=float)
        dt = 1.0 / req.fps
        handler = {
            "sudden-brake": self._sudden_brake,
            "overtake": self._overtake,
            "cut-in-left": self._cut_in,
            "cut-in-right": self._cut_in,
            "lane-encroachment": self._lane_encroachment,
            "u-turn": self._u_turn,
        }.get(req.maneuver)
        if handler is None:
            return fallback_response(req, reason=f"fallback: unknown maneuver {req.maneuver!r}")
        pts = handler(req, base, dt, rng)
        resp = EditorResponse(
            risk_level="High",
            risk_category=req.maneuver,
            is_intersection=req.scene.is_intersection_hint,
            analysis=(f"rule editor: {req.maneuver} against the ego at "
                      f"[{req.scene.ego.position[0]:.1f}, {req.scene.ego.position[1]:.1f}]"),
            waypoints=pts,
        )
        return validate_response(resp, req.n)

    # -- templates ----------------------------------------------------------

    def _path(self, base: np.ndarray) -> np.ndarray:
        """Base path as a polyline rooted at the agent origin."""
        return np.vstack([[0.0, 0.0], base])

    def _initial_speed(self, req: EditorRequest, base: np.ndarray, dt: float) -> float:
        v = float(np.linalg.norm(base[0])) / dt
        return max(v, max(req.scene.risky.speed, 1.0))

    def _sudden_brake(self, req, base, dt, rng) -> np.ndarray:
        n = req.n
        v0 = self._initial_speed(req, base, dt)
        residual = float(rng.uniform(0.0, self.params.brake_residual_max))
        t_mid = 0.5 * n * dt
        t = dt * np.arange(1, n + 1)
        ramp = np.minimum(t, t_mid)
        # arc length under v(t) = v0 - decel * min(t, t_mid), constant afterwards
        decel = v0 * (1.0 - residual) / t_mid
        arcs = v0 * ramp - 0.5 * decel * ramp**2 + residual * v0 * np.maximum(t - t_mid, 0.0)
        return resample_polyline(self._path(base), arcs)

    def _overtake(self, req, base, dt, rng) -> np.ndarray:
        p = self.params
        n = req.n
        v0 = self._initial_speed(req, base, dt)
        path = self._path(base)
        s = polyline_arclength(path)[1:]
        pts = resample_polyline(path, p.overtake_speedup * s)

        ego = req.scene.ego
        t = dt * np.arange(1, n + 1)
        horizon = n * dt
        closing = p.overtake_speedup * v0 - ego.speed * math.cos(ego.heading)
        lead = max(ego.position[0], 0.0) + p.overtake_margin
        t_pass = lead / closing if closing > 0.5 else 0.6 * horizon
        t_pass = min(max(t_pass, 0.3 * horizon), 0.8 * horizon)

        rise_end = 0.5 * t_pass
        fall_len = max(0.2 * horizon, dt)
        offset = (_smoothstep(t / rise_end)
                  - _smoothstep((t - t_pass) / fall_len))
        side = -1.0  # pass on the left (negative lateral)
        lateral = side * (0.55 * req.scene.lane_width) * offset

        tangents = _tangents(pts)
        normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
        return pts + lateral[:, None] * normals

    def _cut_in(self, req, base, dt, rng) -> np.ndarray:
        p = self.params
        n = req.n
        t = dt * np.arange(1, n + 1)
        t_cross = p.cutin_cross_fraction * n * dt
        ego = req.scene.ego
        target = np.array(ego.position) + ego.speed * t_cross * np.array(
            [math.cos(ego.heading), math.sin(ego.heading)])
        v_adj = target[0] / t_cross if t_cross > 0 else 1.0
        v_adj = min(max(v_adj, 1.0), p.max_speed)
        xs = v_adj * t
        ys = target[1] * _smoothstep(t / t_cross)
        return np.stack([xs, ys], axis=1)

    def _lane_encroachment(self, req, base, dt, rng) -> np.ndarray:
        p = self.params
        n = req.n
        t = np.arange(1, n + 1) / n
        ego_y = req.scene.ego.position[1]
        side = math.copysign(1.0, ego_y) if abs(ego_y) > 0.3 else float(rng.choice([-1.0, 1.0]))
        amp = side * p.encroach_fraction * req.scene.lane_width
        profile = _smoothstep(3.0 * t) - _smoothstep(3.0 * (t - 2.0 / 3.0))
        pts = self._path(base)[1:]
        tangents = _tangents(pts)
        normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
        return pts + (amp * profile)[:, None] * normals

    def _u_turn(self, req, base, dt, rng) -> np.ndarray:
        p = self.params
        n = req.n
        v0 = self._initial_speed(req, base, dt)
        radius = p.min_turn_radius * p.turn_radius_margin
        horizon = n * dt
        ego = req.scene.ego
        ego_y = ego.position[1]
        side = math.copysign(1.0, ego_y) if abs(ego_y) > 0.3 else float(rng.choice([-1.0, 1.0]))

        # pace the turn so the arc crosses the ego's projected path as the ego
        # arrives there, within the speed envelope
        v_turn = max(v0, math.pi * radius / (p.turn_completion_fraction * horizon))
        cross = self._arc_path_crossing(radius, side, ego)
        if cross is not None:
            phi_c, t_star = cross
            if t_star > dt:
                v_sync = phi_c * radius / t_star
                v_turn = min(max(v_sync, v_turn), p.max_speed)
        v_turn = min(v_turn, p.max_speed)

        t = dt * np.arange(1, n + 1)
        arc_t = math.pi * radius / v_turn
        phi = np.minimum(v_turn * t / radius, math.pi)
        xs = radius * np.sin(phi)
        ys = side * radius * (1.0 - np.cos(phi))
        straight = np.maximum(t - arc_t, 0.0)
        xs = xs - v_turn * straight          # reversed heading: -x
        return np.stack([xs, ys], axis=1)

    @staticmethod
    def _arc_path_crossing(radius: float, side: float, ego) -> tuple[float, float] | None:
        """First sweep angle where the turn circle meets the ego's projected
        path line, and the ego's arrival time at that point."""
        center = np.array([0.0, side * radius])
        e0 = np.array(ego.position)
        u = np.array([math.cos(ego.heading), math.sin(ego.heading)])
        # |e0 + s u - center|^2 = R^2
        d = e0 - center
        b = float(np.dot(d, u))
        c = float(np.dot(d, d)) - radius * radius
        disc = b * b - c
        if disc < 0.0:
            return None
        s_candidates = [s for s in (-b - math.sqrt(disc), -b + math.sqrt(disc)) if s > 0.0]
        if not s_candidates:
            return None
        best = None
        for s in s_candidates:
            point = e0 + s * u
            rel = point - center
            # position(phi) - center = (R sin phi, -side R cos phi)
            phi = math.atan2(rel[0], -rel[1] * side) % (2.0 * math.pi)
            if phi <= math.pi and (best is None or s < best[1]):
                best = (phi, s)
        if best is None:
            return None
        phi, s = best
        t_star = s / max(ego.speed, 0.5)
        return phi, t_star


def _tangents(pts: np.ndarray) -> np.ndarray:
    d = np.gradient(pts, axis=0)
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    norms[norms < 1e-9] = 1.0
    return d / norms
