"""Deterministic prompt assembly for the remote editor."""

from __future__ import annotations

from ..scene import AgentSnapshot
from .base import EditorRequest

_ROLE = (
    "You are a professional driving-scenario designer. Your task is to edit the "
    "future trajectory of a designated risky vehicle so that it creates a "
    "challenging but physically plausible interaction with the ego vehicle."
)

_LEGEND = (
    "The attached bird's-eye-view image shows the ego vehicle in white, the "
    "risky agent in yellow, neutral vehicles in blue, the drivable area in "
    "gray, lane markings in magenta, and the background in black."
)

_RULES = (
    "The required behavior depends on the risk category: an `opposite` position "
    "requires a u-turn or lane-encroachment; `same_behind` an aggressive "
    "overtake; `same_ahead` a sudden-brake; and `adjacent_left` or "
    "`adjacent_right` a cut-in."
)

_FREEDOM = (
    "If the ego vehicle is at an intersection you have greater freedom to "
    "generate diverse risky trajectories based on the intersection structure; "
    "otherwise you must follow the predefined rules."
)

_SCHEMA = (
    "Respond with a single JSON object containing: a `risk_level` (`High`, "
    "`Medium`, or `Low`); a `risk_category` string describing the maneuver; the "
    "`is_intersection` boolean; a detailed `analysis` paragraph; and a list of "
    "exactly {n} `waypoints` as [relative_x, relative_y] coordinates in the "
    "risky agent's frame, formatted to three decimal places."
)


def _state_lines(label: str, s: AgentSnapshot) -> list[str]:
    lines = [
        f"{label}: position [{s.position[0]:.3f}, {s.position[1]:.3f}], "
        f"heading {s.heading:.3f} rad, speed {s.speed:.3f} m/s."
    ]
    if s.past:
        pts = ", ".join(f"[{x:.3f}, {y:.3f}]" for x, y in s.past)
        lines.append(f"{label} past trajectory (oldest first): {pts}.")
    return lines


def build_prompt(req: EditorRequest, include_base: bool = True) -> str:
    """Full editing prompt; `include_base=False` asks for generation from scratch."""
    scene = req.scene
    parts = [_ROLE, _LEGEND]
    parts.append(
        f"BEV scale: {scene.bev_scale} m/pixel, image size "
        f"{scene.bev_size[0]}x{scene.bev_size[1]} px. Simulation rate: "
        f"{scene.fps:g} frames per second. All coordinates below are relative "
        f"to the risky agent's current pose."
    )
    parts.extend(_state_lines("Ego vehicle", scene.ego))
    parts.extend(_state_lines("Risky agent", scene.risky))
    if scene.neutrals:
        pts = ", ".join(f"[{s.position[0]:.3f}, {s.position[1]:.3f}]"
                        for s in scene.neutrals)
        parts.append(f"Neutral vehicles at: {pts}.")
    parts.append(
        f"Risk category: `{scene.risk_category}`. Requested maneuver: "
        f"`{req.maneuver}`. Ego at intersection: "
        f"{'true' if scene.is_intersection_hint else 'false'}."
    )
    parts.append(_RULES)
    parts.append(_FREEDOM)
    if include_base:
        rows = "; ".join(f"[{x:.3f}, {y:.3f}]" for x, y in scene.base_trajectory)
        parts.append(
            f"Edit the following base trajectory of {req.n} future waypoints "
            f"(one per frame): {rows}. Keep its overall motion trend at the "
            f"start while making the interaction hazardous."
        )
    else:
        parts.append(
            f"Generate {req.n} future waypoints (one per frame) for the risky "
            f"agent from scratch."
        )
    parts.append(
        "The edited trajectory must be kinematically feasible, smooth, stay on "
        "the drivable area, avoid the neutral vehicles, and create a close "
        "call or overlap with the ego vehicle's future path."
    )
    parts.append(_SCHEMA.format(n=req.n))
    return "\n\n".join(parts)
