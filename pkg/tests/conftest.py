from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from nearmiss.config import RunConfig, load_config
from nearmiss.editor.base import EditorRequest
from nearmiss.scene import AgentSnapshot, SceneMessage
from nearmiss.world.mapgraph import build_map

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def sample_reply_text() -> str:
    return (DATA_DIR / "editor_reply_sample.txt").read_text()


@pytest.fixture()
def straight_map():
    return build_map({"version": "map/v1", "preset": "straight", "length": 200.0,
                      "width": 3.5, "lanes_per_direction": 2})


@pytest.fixture()
def two_way_map():
    return build_map({"version": "map/v1", "preset": "two_way", "length": 200.0,
                      "width": 3.5})


@pytest.fixture()
def cross_map():
    return build_map({"version": "map/v1", "preset": "cross", "length": 120.0,
                      "width": 3.5})


@pytest.fixture()
def default_cfg() -> RunConfig:
    return load_config()


def make_scene(n: int = 40, fps: float = 15.0, risky_speed: float = 7.5,
               ego_position=(20.0, 0.0), ego_heading: float = 0.0,
               ego_speed: float = 6.0, maneuver: str = "sudden-brake",
               category: str = "same_ahead", is_intersection: bool = False,
               base: np.ndarray | None = None, lane_width: float = 3.5) -> SceneMessage:
    """Synthetic scene in the risky agent's frame with a straight-ahead base."""
    if base is None:
        dt = 1.0 / fps
        xs = risky_speed * dt * np.arange(1, n + 1)
        base = np.stack([xs, np.zeros(n)], axis=1)
    return SceneMessage(
        bev_png=b"\x89PNG\r\n\x1a\n",
        bev_scale=0.25,
        bev_size=(80, 120),
        fps=fps,
        ego=AgentSnapshot(position=tuple(ego_position), heading=ego_heading,
                          speed=ego_speed),
        risky=AgentSnapshot(position=(0.0, 0.0), heading=0.0, speed=risky_speed),
        neutrals=[],
        risk_category=category,
        maneuver=maneuver,
        is_intersection_hint=is_intersection,
        horizon=n,
        lane_width=lane_width,
        base_trajectory=base,
    )


def make_request(**kwargs) -> EditorRequest:
    scene = make_scene(**kwargs)
    return EditorRequest(scene=scene, maneuver=scene.maneuver,
                         n=scene.horizon, fps=scene.fps)
