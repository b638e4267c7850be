"""Bird's-eye-view raster of the scene, ego-centered and ego-up.

Fixed six-color palette: ego white, risky agent yellow, neutral vehicles
blue, drivable area gray, lane markings magenta, background black. Draw
order (back to front): background, drivable, markings, neutrals, risky, ego.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .geometry import rot_matrix
from .world.state import WorldState
from .world.vehicle import VehicleState

PALETTE = {
    "background": (0, 0, 0),
    "drivable": (128, 128, 128),
    "marking": (255, 0, 255),
    "neutral": (0, 0, 255),
    "risky": (255, 255, 0),
    "ego": (255, 255, 255),
}

MARKING_HALF_WIDTH = 0.15  # m


@dataclass
class BevRaster:
    pixels: np.ndarray          # (H, W, 3) uint8
    scale: float                # m / pixel

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return (w, h)

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


def render_bev(world: WorldState, scale: float = 0.25,
               size: tuple[int, int] = (80, 120)) -> BevRaster:
    """Rasterize the scene around the ego. `size` is (width, height) pixels."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    w_px, h_px = size
    img = np.zeros((h_px, w_px, 3), dtype=np.uint8)

    # world coordinates of every pixel center: ego at the image center, ego
    # heading toward row 0, ego's right toward increasing column
    cols, rows = np.meshgrid(np.arange(w_px), np.arange(h_px))
    fwd = (h_px / 2.0 - rows - 0.5) * scale          # m ahead of ego
    right = (cols + 0.5 - w_px / 2.0) * scale        # m to ego's right
    ego = world.ego
    rot = rot_matrix(ego.heading)
    fwd_vec = rot @ np.array([1.0, 0.0])
    right_vec = rot @ np.array([0.0, 1.0])
    px = ego.x + fwd * fwd_vec[0] + right * right_vec[0]
    py = ego.y + fwd * fwd_vec[1] + right * right_vec[1]
    pts = np.stack([px.ravel(), py.ravel()], axis=1)

    drivable = np.zeros(len(pts), dtype=bool)
    marking = np.zeros(len(pts), dtype=bool)
    for lane_id in sorted(world.graph.lanes):
        lane = world.graph.lanes[lane_id]
        d = _dist_to_polyline(pts, lane.centerline)
        drivable |= d <= lane.width / 2.0
        marking |= np.abs(d - lane.width / 2.0) <= MARKING_HALF_WIDTH
    for poly in world.graph.intersections:
        drivable |= _in_convex_polygon(pts, poly)

    img.reshape(-1, 3)[drivable] = PALETTE["drivable"]
    img.reshape(-1, 3)[marking] = PALETTE["marking"]

    for aid in sorted(world.agents):
        if aid == world.risky_id:
            continue
        _paint_vehicle(img, pts, world.agents[aid], PALETTE["neutral"])
    if world.risky_id is not None:
        _paint_vehicle(img, pts, world.agents[world.risky_id], PALETTE["risky"])
    _paint_vehicle(img, pts, ego, PALETTE["ego"])
    return BevRaster(pixels=img, scale=scale)


def _paint_vehicle(img: np.ndarray, pts: np.ndarray, v: VehicleState,
                   color: tuple[int, int, int]) -> None:
    rel = (pts - v.position()) @ rot_matrix(v.heading)
    inside = (np.abs(rel[:, 0]) <= v.length / 2.0) & (np.abs(rel[:, 1]) <= v.width / 2.0)
    img.reshape(-1, 3)[inside] = color


def _dist_to_polyline(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    best = np.full(len(pts), np.inf)
    for i in range(len(poly) - 1):
        a, b = poly[i], poly[i + 1]
        d = b - a
        L2 = float(d @ d)
        if L2 <= 0:
            continue
        t = np.clip(((pts - a) @ d) / L2, 0.0, 1.0)
        q = a + t[:, None] * d
        best = np.minimum(best, np.linalg.norm(pts - q, axis=1))
    return best


def _in_convex_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    inside = np.ones(len(pts), dtype=bool)
    n = len(poly)
    # consistent orientation: use the polygon's signed area
    area = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    sign = 1.0 if area >= 0 else -1.0
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= sign * cross >= 0.0
    return inside
