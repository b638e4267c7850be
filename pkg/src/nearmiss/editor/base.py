"""Editor boundary: request/response types and the validation gate.

Every editor implementation is total: transport or parsing trouble degrades
to a fallback response (the base trajectory, tagged low risk) instead of
raising into the training loop. Only configuration errors propagate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import SceneMessage

RISK_LEVELS = ("High", "Medium", "Low")


class EditorConfigError(ValueError):
    """Unrecoverable editor setup problem (e.g. missing credential)."""


class ResponseValidationError(ValueError):
    """Editor reply violates the response contract."""


@dataclass
class EditorRequest:
    scene: SceneMessage
    maneuver: str               # maneuver tag, matches scene.maneuver
    n: int
    fps: float

    def __post_init__(self) -> None:
        if len(self.scene.base_trajectory) != self.n:
            raise ValueError(
                f"base trajectory has {len(self.scene.base_trajectory)} points, expected {self.n}")
        if self.scene.maneuver != self.maneuver:
            raise ValueError(
                f"maneuver {self.maneuver!r} does not match scene tag {self.scene.maneuver!r}")


@dataclass
class EditorResponse:
    risk_level: str
    risk_category: str
    is_intersection: bool
    analysis: str
    waypoints: np.ndarray       # (N, 2), risky-agent frame
    fallback: bool = False

    def __post_init__(self) -> None:
        self.waypoints = np.asarray(self.waypoints, dtype=float)


def validate_response(resp: EditorResponse, n: int) -> EditorResponse:
    if resp.risk_level not in RISK_LEVELS:
        raise ResponseValidationError(f"risk_level {resp.risk_level!r} not in {RISK_LEVELS}")
    wp = resp.waypoints
    if wp.ndim != 2 or wp.shape[1] != 2:
        raise ResponseValidationError(f"waypoints must be (N,2), got shape {wp.shape}")
    if len(wp) != n:
        raise ResponseValidationError(f"expected {n} waypoints, got {len(wp)}")
    if not np.all(np.isfinite(wp)):
        raise ResponseValidationError("waypoints contain non-finite values")
    return resp


def fallback_response(req: EditorRequest, reason: str = "fallback: base trajectory") -> EditorResponse:
    return EditorResponse(
        risk_level="Low",
        risk_category=req.scene.risk_category,
        is_intersection=req.scene.is_intersection_hint,
        analysis=reason,
        waypoints=np.array(req.scene.base_trajectory, dtype=float, copy=True),
        fallback=True,
    )


class Editor:
    """Interface: subclasses implement edit(req) -> EditorResponse."""

    name = "editor"

    def edit(self, req: EditorRequest) -> EditorResponse:
        raise NotImplementedError


class IdentityEditor(Editor):
    """Returns the base trajectory untouched; the control arm for studies."""

    name = "identity"

    def edit(self, req: EditorRequest) -> EditorResponse:
        return EditorResponse(
            risk_level="Low",
            risk_category=req.scene.risk_category,
            is_intersection=req.scene.is_intersection_hint,
            analysis="identity: base trajectory unchanged",
            waypoints=np.array(req.scene.base_trajectory, dtype=float, copy=True),
        )
