"""Command-line surface.

Exit codes: 0 success, 2 configuration/validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .editor.base import EditorConfigError
from .editor.fixtures import FixtureStore
from .editor.remote import RemoteEditor, build_wire_request
from .evaluation import aggregate, diversity_study, emit_report
from .pipeline import run_edit_pipeline
from .scene import ClassificationError
from .trainer import (
    RandomPolicy,
    ScriptedStraightPolicy,
    build_editor,
    load_checkpoint,
    run_episode,
    subsystem_seed,
    train,
    training_map,
    TrainingAborted,
)
from .world.mapgraph import MapSpecError, build_map, map_document_bytes

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_cfg(args) -> RunConfig:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "editor", None):
        overrides.setdefault("editor", {})["kind"] = args.editor
    return load_config(args.config, overrides)


def cmd_map(args) -> int:
    try:
        spec_text = Path(args.spec).read_text()
    except OSError as e:
        print(f"error: cannot read map spec: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        graph = build_map(spec_text)
    except MapSpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(map_document_bytes(graph))
    print(f"wrote {out} ({len(graph.lanes)} lanes, "
          f"{len(graph.intersections)} intersections)")
    return EXIT_OK


def cmd_edit_demo(args) -> int:
    cfg = _load_cfg(args)
    editor = build_editor(cfg, seed=subsystem_seed(cfg.seed, "editor"))
    from .world.state import spawn_world

    graph = _demo_graph(cfg)
    world = spawn_world(graph, max(cfg.world.n_agents, 3),
                        subsystem_seed(cfg.seed, "world", args.scene_seed),
                        fps=cfg.world.fps, min_gap=8.0, plant=cfg.plant)
    rng = np.random.default_rng(subsystem_seed(cfg.seed, "maneuver", args.scene_seed))
    try:
        pipe = run_edit_pipeline(world, cfg, editor, rng)
    except ClassificationError as e:
        print(f"error: scene unusable: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if pipe is None:
        print("error: no agent inside the hazard zone for this seed", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stage, traj in pipe.stages.items():
        path = out / f"stage_{stage.value}.json"
        path.write_text(json.dumps(traj.to_record(), sort_keys=True, indent=1) + "\n")
    (out / "scene.json").write_text(pipe.scene_msg.to_json() + "\n")
    (out / "bev.png").write_bytes(pipe.bev.png_bytes())
    print(f"maneuver {pipe.maneuver.value} on agent {pipe.risky_id}; "
          f"feasible={pipe.feasibility.within_limits}; wrote {out}")
    return EXIT_OK


def _demo_graph(cfg: RunConfig):
    doc = {"version": "map/v1", "preset": "cross", "length": 120.0,
           "width": cfg.scene.lane_width}
    return build_map(doc)


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    try:
        final = train(cfg, args.out, resume_from=args.resume, log_every=args.log_every,
                      trace_pipeline=args.trace_pipeline)
    except TrainingAborted as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"final checkpoint: {final}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    if args.episodes < 1:
        print("error: --episodes must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    from .policy.observation import OBS_DIM
    from .policy.sac import SacAgent
    from .trainer import ACT_DIM

    graph = training_map(cfg)
    if args.policy == "random":
        policy = RandomPolicy(seed=cfg.seed)
    elif args.policy == "straight":
        policy = ScriptedStraightPolicy()
    else:
        agent = SacAgent(OBS_DIM, ACT_DIM, cfg.sac, seed=subsystem_seed(cfg.seed, "policy"))
        try:
            load_checkpoint(args.checkpoint, cfg, agent, None, restore_buffer=False)
        except Exception as e:
            print(f"error: cannot load checkpoint: {e}", file=sys.stderr)
            return EXIT_CONFIG
        policy = agent
    editor = build_editor(cfg, seed=subsystem_seed(cfg.seed, "editor")) \
        if args.kind == "challenging" else None
    results = []
    for i in range(args.episodes):
        res = run_episode(cfg, graph, policy, args.kind, editor,
                          subsystem_seed(cfg.seed, "eval", i),
                          deterministic_policy=True)
        results.append(res)
    report = aggregate(results, seed=cfg.seed)
    paths = emit_report(report, [], args.out)
    print(json.dumps(report.to_row(), sort_keys=True))
    print(f"wrote {paths[0].parent}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_cfg(args)
    if args.scenes < 1:
        print("error: --scenes must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    editor = build_editor(cfg, seed=subsystem_seed(cfg.seed, "editor"))
    study = diversity_study(cfg, args.scenes, cfg.seed, editor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .evaluation import FEATURE_COLUMNS

    cols = ("scene", "variant", "maneuver") + FEATURE_COLUMNS
    lines = [",".join(cols)]
    for r in study.rows:
        lines.append(",".join(str(r.get(c)) for c in cols))
    (out / "features.csv").write_text("\n".join(lines) + "\n")
    (out / "diversity_summary.json").write_text(
        json.dumps(study.summary, sort_keys=True, indent=1) + "\n")
    print(json.dumps(study.summary.get("claims", {}), sort_keys=True))
    return EXIT_OK


def cmd_record_fixtures(args) -> int:
    cfg = _load_cfg(args)
    if not cfg.remote_editor.endpoint:
        print("error: remote editor endpoint not configured; cannot record fixtures "
              "offline", file=sys.stderr)
        return EXIT_CONFIG
    try:
        editor = RemoteEditor(cfg.remote_editor)
    except EditorConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    from .world.state import spawn_world

    graph = _demo_graph(cfg)
    store = FixtureStore()
    recorded = 0
    for i in range(args.scenes):
        world = spawn_world(graph, max(cfg.world.n_agents, 3),
                            subsystem_seed(cfg.seed, "world", i),
                            fps=cfg.world.fps, min_gap=8.0, plant=cfg.plant)
        rng = np.random.default_rng(subsystem_seed(cfg.seed, "maneuver", i))
        try:
            pipe = run_edit_pipeline(world, cfg, editor, rng)
        except ClassificationError:
            continue
        if pipe is None or pipe.response.fallback:
            continue
        body = build_wire_request(_request_for(pipe, cfg), cfg.remote_editor)
        store.put(body, json.dumps({
            "risk_level": pipe.response.risk_level,
            "risk_category": pipe.response.risk_category,
            "is_intersection": pipe.response.is_intersection,
            "analysis": pipe.response.analysis,
            "waypoints": [[round(float(x), 3), round(float(y), 3)]
                          for x, y in pipe.response.waypoints],
        }))
        recorded += 1
    store.save(args.out)
    print(f"recorded {recorded} fixtures to {args.out} "
          f"(keys: {', '.join(sorted(store.entries)[:3])}...)")
    return EXIT_OK


def _request_for(pipe, cfg):
    from .editor.base import EditorRequest

    return EditorRequest(scene=pipe.scene_msg, maneuver=pipe.maneuver.value,
                         n=cfg.trajgen.horizon, fps=cfg.world.fps)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nearmiss",
                                description="adversarial near-miss scenario training")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="run/v1 YAML config")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--editor", choices=["rule", "vlm", "direct", "fixture"],
                        default=None)

    sp = sub.add_parser("map", help="build and validate a map document")
    sp.add_argument("spec", help="map/v1 YAML spec")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_map)

    sp = sub.add_parser("edit-demo", help="run one scene through the edit pipeline")
    common(sp)
    sp.add_argument("--scene-seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trace-pipeline", action="store_true")
    sp.set_defaults(fn=cmd_edit_demo)

    sp = sub.add_parser("train", help="closed-loop training")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--resume", default=None, help="checkpoint to resume from")
    sp.add_argument("--log-every", type=int, default=10)
    sp.add_argument("--trace-pipeline", action="store_true",
                    help="log every editing stage of every adversarial scene")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--policy", choices=["checkpoint", "random", "straight"],
                    default="checkpoint")
    sp.add_argument("--kind", choices=["normal", "challenging"], default="normal")
    sp.add_argument("--episodes", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("analyze", help="trajectory diversity study")
    common(sp)
    sp.add_argument("--scenes", type=int, default=100)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("record-fixtures", help="capture live editor replies")
    common(sp)
    sp.add_argument("--scenes", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_record_fixtures)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, EditorConfigError, MapSpecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
