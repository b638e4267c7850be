"""One scene through the full editing chain:

scene analysis -> base trajectory -> editor -> smoothing -> blending ->
tracked rollout. Produces every intermediate stage for logging and analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bev import BevRaster, render_bev
from .config import RunConfig
from .editor.base import Editor, EditorRequest, EditorResponse
from .postproc import (
    FeasibilityReport,
    TrackedRollout,
    bspline_smooth,
    feasibility_report,
    lqr_track,
    sigmoid_fuse,
)
from .scene import (
    DrivingMode,
    HazardousManeuver,
    SceneMessage,
    assign_maneuver,
    classify_driving_mode,
    encode_scene,
    select_risky_agent,
)
from .trajgen import Frame, Stage, Trajectory, ctrv_predict, fuse_linear, map_waypoint_traj
from .world.state import WorldState


@dataclass
class PipelineResult:
    risky_id: str
    mode: DrivingMode
    maneuver: HazardousManeuver
    scene_msg: SceneMessage
    bev: BevRaster
    response: EditorResponse
    stages: dict[Stage, Trajectory]     # world frame
    rollout: TrackedRollout
    feasibility: FeasibilityReport


def build_base_trajectory(world: WorldState, risky_id: str, horizon: int) -> Trajectory:
    risky = world.agents[risky_id]
    t_model = ctrv_predict(risky, horizon, world.dt)
    t_map = map_waypoint_traj(risky, world.graph, horizon, world.dt)
    return fuse_linear(t_model, t_map)


def run_edit_pipeline(world: WorldState, cfg: RunConfig, editor: Editor,
                      rng: np.random.Generator,
                      history: dict[str, list] | None = None) -> PipelineResult | None:
    """Returns None when no agent is inside the hazard zone.

    Raises ClassificationError when the candidate cannot be related to a lane;
    the caller decides whether to downgrade the episode.
    """
    world.localize_all()
    risky_id = select_risky_agent(world, cfg.scene.zone_radius)
    if risky_id is None:
        return None
    risky = world.agents[risky_id]

    mode = classify_driving_mode(world.ego, risky, world.graph)
    is_inter = world.graph.in_intersection(world.ego.position())
    maneuver = assign_maneuver(mode, is_inter, rng)

    horizon = cfg.trajgen.horizon
    t_model = ctrv_predict(risky, horizon, world.dt)
    t_map = map_waypoint_traj(risky, world.graph, horizon, world.dt)
    t_base = fuse_linear(t_model, t_map)

    prev_risky = world.risky_id
    world.risky_id = risky_id
    bev = render_bev(world, scale=cfg.scene.bev_scale,
                     size=(cfg.scene.bev_width, cfg.scene.bev_height))
    world.risky_id = prev_risky

    scene_msg = encode_scene(
        world, risky_id, maneuver, mode, t_base,
        bev_png=bev.png_bytes(), bev_scale=bev.scale, bev_size=bev.size,
        history=history, is_intersection=is_inter, lane_width=cfg.scene.lane_width)
    req = EditorRequest(scene=scene_msg, maneuver=maneuver.value,
                        n=horizon, fps=world.fps)
    response = editor.edit(req)

    origin = risky.position()
    heading = risky.heading
    t_edit = Trajectory(stage=Stage.EDIT, points=response.waypoints,
                        dt=world.dt, frame=Frame.AGENT).to_world_frame(origin, heading)
    t_smooth = bspline_smooth(t_edit, degree=cfg.postproc.spline_degree,
                              smoothing=cfg.postproc.spline_smoothing,
                              knot_spacing=cfg.postproc.spline_knot_spacing)
    t_curve = sigmoid_fuse(t_base, t_smooth, cfg.sigmoid)
    rollout = lqr_track(t_curve, risky, world.dt, cfg.lqr, cfg.plant)
    report = feasibility_report(rollout.trajectory, world.dt, plant=cfg.plant)

    return PipelineResult(
        risky_id=risky_id,
        mode=mode,
        maneuver=maneuver,
        scene_msg=scene_msg,
        bev=bev,
        response=response,
        stages={
            Stage.MODEL: t_model,
            Stage.MAP: t_map,
            Stage.BASE: t_base,
            Stage.EDIT: t_edit,
            Stage.SMOOTHED: t_smooth,
            Stage.CURVE: t_curve,
            Stage.FINAL: rollout.trajectory,
        },
        rollout=rollout,
        feasibility=report,
    )
