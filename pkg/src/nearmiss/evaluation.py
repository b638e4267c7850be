"""Metric aggregation and the trajectory-diversity study."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .editor.base import Editor, IdentityEditor
from .editor.remote import OfflineDirectEditor
from .geometry import curvature_profile, polyline_arclength, resample_polyline, to_frame, wrap_angle
from .pipeline import run_edit_pipeline
from .scene import ClassificationError
from .trainer import EpisodeResult, subsystem_seed
from .trajgen import Stage, Trajectory
from .world.autopilot import AutopilotParams, autopilot_control
from .world.mapgraph import build_map
from .world.routing import Route
from .world.state import spawn_world
from .world.vehicle import step_vehicle

MPS_TO_KMH = 3.6


@dataclass
class MetricsReport:
    rc: float                   # mean route completion
    td: float                   # total distance, m
    cr: float                   # fraction of episodes with a collision
    cpm: float | None           # collisions per km; None when td == 0
    cs: float                   # mean collision speed, km/h (0 without collisions)
    avg_speed: float            # km/h
    episodes: int
    seed: int

    def to_row(self) -> dict:
        return {
            "RC": round(self.rc, 6),
            "TD": round(self.td, 3),
            "CR": round(self.cr, 6),
            "CPM": None if self.cpm is None else round(self.cpm, 6),
            "CS": round(self.cs, 6),
            "AS": round(self.avg_speed, 6),
        }


METRIC_COLUMNS = ("RC", "TD", "CR", "CPM", "CS", "AS")


def aggregate(results: list[EpisodeResult], seed: int = 0) -> MetricsReport:
    if not results:
        raise ValueError("need at least one episode result")
    n = len(results)
    td = sum(r.distance for r in results)
    collisions = sum(r.collisions for r in results)
    speeds = [s for r in results for s in r.collision_speeds]
    return MetricsReport(
        rc=sum(r.completion for r in results) / n,
        td=td,
        cr=sum(1 for r in results if r.collisions > 0) / n,
        cpm=(collisions / (td / 1000.0)) if td > 0 else None,
        cs=MPS_TO_KMH * (sum(speeds) / len(speeds)) if speeds else 0.0,
        avg_speed=MPS_TO_KMH * sum(r.mean_speed for r in results) / n,
        episodes=n,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# trajectory features


@dataclass
class TrajFeatures:
    length: float
    avg_speed: float
    max_curvature: float
    endpoint: tuple[float, float]
    min_dist_to_ego: float
    max_accel: float
    max_steer_proxy: float

    def to_row(self) -> dict:
        return {
            "length": round(self.length, 4),
            "avg_speed": round(self.avg_speed, 4),
            "max_curvature": round(self.max_curvature, 5),
            "endpoint_x": round(self.endpoint[0], 4),
            "endpoint_y": round(self.endpoint[1], 4),
            "min_dist_to_ego": round(self.min_dist_to_ego, 4),
            "max_accel": round(self.max_accel, 4),
            "max_steer_proxy": round(self.max_steer_proxy, 4),
        }


FEATURE_COLUMNS = ("length", "avg_speed", "max_curvature", "endpoint_x", "endpoint_y",
                   "min_dist_to_ego", "max_accel", "max_steer_proxy")


def extract_features(t: Trajectory, ego_path: Trajectory,
                     controls: list[dict] | None = None,
                     wheelbase: float = 2.8,
                     max_wheel_angle: float = math.radians(35.0)) -> TrajFeatures:
    """Geometric features of `t` plus its closest time-aligned approach to the
    ego path. Commanded steering from `controls` replaces the kinematic proxy
    when a control log exists."""
    if abs(t.dt - ego_path.dt) > 1e-12:
        raise ValueError("trajectories must share dt")
    pts = t.points
    arcs = polyline_arclength(pts)
    length = float(arcs[-1])
    avg_speed = length / (t.n * t.dt)
    curv = curvature_profile(pts, min_spacing=0.05)
    max_curv = float(curv.max()) if len(curv) else 0.0

    n = min(t.n, ego_path.n)
    dists = np.linalg.norm(pts[:n] - ego_path.points[:n], axis=1)
    min_dist = float(dists.min())

    speeds = np.diff(arcs) / t.dt
    accels = np.diff(speeds) / t.dt
    max_accel = float(np.max(np.abs(accels))) if len(accels) else 0.0

    if controls:
        proxy = max(abs(c["steer"]) for c in controls)
    else:
        # heading-change rate x wheelbase / speed, normalized by the wheel limit
        seg = np.diff(pts, axis=0)
        headings = np.arctan2(seg[:, 1], seg[:, 0])
        dheading = np.abs(np.diff(np.unwrap(headings)))
        seg_speed = np.maximum(speeds[:-1], 0.5)
        proxies = np.arctan(dheading / t.dt * wheelbase / seg_speed) / max_wheel_angle
        proxy = float(np.clip(proxies, 0.0, 2.0).max()) if len(proxies) else 0.0

    return TrajFeatures(
        length=length,
        avg_speed=avg_speed,
        max_curvature=max_curv,
        endpoint=(float(pts[-1, 0]), float(pts[-1, 1])),
        min_dist_to_ego=min_dist,
        max_accel=max_accel,
        max_steer_proxy=proxy,
    )


# ---------------------------------------------------------------------------
# diversity study


@dataclass
class DiversityStudy:
    rows: list[dict]                       # one per (scene, variant)
    summary: dict                          # per-variant medians/quartiles + claims

    def variant_values(self, variant: str, column: str) -> np.ndarray:
        return np.array([r[column] for r in self.rows if r["variant"] == variant])


def _chain_route(graph, lane_id: str, arc: float, length: float = 100.0) -> Route:
    """Route following the lane chain ahead (straightest successor at forks)."""
    lane = graph.lanes[lane_id]
    pts = [lane.point_at(arc)]
    pts.extend(lane.centerline[polyline_arclength(lane.centerline) > arc])
    covered = lane.length - arc
    current = lane
    guard = 0
    while covered < length and guard < 32:
        guard += 1
        if not current.successors:
            break
        end_heading = current.heading_at(current.length)
        current = graph.lanes[min(
            current.successors,
            key=lambda sid: (abs(wrap_angle(graph.lanes[sid].heading_at(0.0) - end_heading)), sid))]
        pts.extend(current.centerline)
        covered += current.length
    poly = np.asarray(pts)
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > 1e-9:
            keep.append(i)
    poly = poly[keep]
    total = polyline_arclength(poly)[-1]
    n = max(int(round(total / 2.0)), 1)
    return Route(resample_polyline(poly, np.linspace(0.0, total, n + 1)), spacing=total / n)


def _ego_projection(world, route, n: int, cfg: RunConfig) -> Trajectory:
    """Ego rolled forward on route-following autopilot for n steps.

    Deliberately blind to traffic: the projection is the ego's intent, so a
    threatening trajectory shows up as a small aligned distance rather than
    being masked by the projection braking for it.
    """
    v = world.ego.copy()
    pts = []
    ap = AutopilotParams(cruise_speed=max(v.speed, 3.0))
    for _ in range(n):
        steer, accel = autopilot_control(v, route, [], ap, cfg.plant)
        v = step_vehicle(v, steer, accel, world.dt, cfg.plant)
        pts.append([v.x, v.y])
    return Trajectory(stage=Stage.FINAL, points=np.asarray(pts), dt=world.dt)


def diversity_study(cfg: RunConfig, n_scenes: int, seed: int,
                    edited_editor: Editor, generated_editor: Editor | None = None,
                    base_editor: Editor | None = None,
                    map_preset: str = "cross") -> DiversityStudy:
    """Per-scene features for base / edited / generated editor variants.

    Each variant runs the same scene through the full pipeline; "base" uses an
    identity editor, so its final trajectory is the faithful execution of the
    unedited base. Features are computed in the risky agent's frame of each
    scene so endpoint spread is comparable across scenes.
    """
    if n_scenes < 1:
        raise ValueError("need at least one scene")
    generated_editor = generated_editor or OfflineDirectEditor()
    base_editor = base_editor or IdentityEditor()
    doc = {"version": "map/v1", "preset": map_preset, "length": 120.0,
           "width": cfg.scene.lane_width}
    graph = build_map(doc)
    rows: list[dict] = []
    scene_idx = 0
    attempts = 0
    while scene_idx < n_scenes and attempts < n_scenes * 20:
        attempts += 1
        scene_seed = subsystem_seed(seed, "diversity", attempts)
        world = spawn_world(graph, max(cfg.world.n_agents, 4), scene_seed,
                            fps=cfg.world.fps, min_gap=8.0, plant=cfg.plant)
        try:
            route = _chain_route(graph, world.ego.lane_id, world.ego.arc_pos)
        except KeyError:
            continue
        editors = {"base": base_editor, "edited": edited_editor,
                   "generated": generated_editor}
        pipes = {}
        try:
            for name, editor in editors.items():
                rng = np.random.default_rng(subsystem_seed(scene_seed, "maneuver"))
                pipes[name] = run_edit_pipeline(world, cfg, editor, rng)
        except ClassificationError:
            continue
        if any(p is None for p in pipes.values()):
            continue

        risky = world.agents[pipes["edited"].risky_id]
        origin, heading = risky.position(), risky.heading
        ego_path = _ego_projection(world, route, cfg.trajgen.horizon, cfg)
        ego_rel = Trajectory(Stage.FINAL, to_frame(ego_path.points, origin, heading),
                             world.dt)

        for name, pipe in pipes.items():
            traj = pipe.stages[Stage.FINAL]
            rel = Trajectory(traj.stage, to_frame(traj.points, origin, heading), traj.dt)
            feats = extract_features(rel, ego_rel, controls=pipe.rollout.controls,
                                     wheelbase=cfg.plant.wheelbase,
                                     max_wheel_angle=cfg.plant.max_wheel_angle)
            row = {"scene": scene_idx, "variant": name,
                   "maneuver": pipe.maneuver.value}
            row.update(feats.to_row())
            rows.append(row)
        scene_idx += 1

    study = DiversityStudy(rows=rows, summary={})
    summary: dict = {"scenes": scene_idx}
    for variant in ("base", "edited", "generated"):
        block = {}
        for col in FEATURE_COLUMNS:
            vals = study.variant_values(variant, col)
            if len(vals) == 0:
                continue
            block[col] = {
                "median": float(np.median(vals)),
                "q1": float(np.quantile(vals, 0.25)),
                "q3": float(np.quantile(vals, 0.75)),
            }
        ex = np.column_stack([study.variant_values(variant, "endpoint_x"),
                              study.variant_values(variant, "endpoint_y")])
        block["endpoint_cov_trace"] = float(np.trace(np.cov(ex.T))) if len(ex) > 1 else 0.0
        summary[variant] = block
    summary["claims"] = {
        "edited_min_dist_below_base": bool(
            summary["edited"]["min_dist_to_ego"]["median"]
            < summary["base"]["min_dist_to_ego"]["median"]),
        "edited_endpoint_spread_above_base": bool(
            summary["edited"]["endpoint_cov_trace"]
            > summary["base"]["endpoint_cov_trace"]),
    }
    study.summary = summary
    return study


# ---------------------------------------------------------------------------
# report files


def _csv_cell(v) -> str:
    if v is None:
        return "NA"
    return f"{v}"


def emit_report(report: MetricsReport, features: list[dict], out_dir: str | Path) -> list[Path]:
    """Write metrics.csv, features.csv and summary.json; byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    metrics_path = out / "metrics.csv"
    row = report.to_row()
    lines = [",".join(METRIC_COLUMNS),
             ",".join(_csv_cell(row[c]) for c in METRIC_COLUMNS)]
    metrics_path.write_text("\n".join(lines) + "\n")
    paths.append(metrics_path)

    feats_path = out / "features.csv"
    cols = ("scene", "variant", "maneuver") + FEATURE_COLUMNS
    lines = [",".join(cols)]
    for r in features:
        lines.append(",".join(_csv_cell(r.get(c)) for c in cols))
    feats_path.write_text("\n".join(lines) + "\n")
    paths.append(feats_path)

    summary_path = out / "summary.json"
    doc = {"version": "metrics/v1", "metrics": row,
           "episodes": report.episodes, "seed": report.seed}
    summary_path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    paths.append(summary_path)
    return paths
