"""Closed-loop training: episode orchestration, normal/challenging
alternation, adversary playback, checkpointing and resume."""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, config_digest_dict
from .editor.base import Editor
from .editor.fixtures import FixtureEditor, FixtureStore
from .editor.remote import DirectGenerationEditor, OfflineDirectEditor, RemoteEditor
from .editor.rule import RuleBasedEditor
from .pipeline import run_edit_pipeline
from .policy import checkpoint as ckpt
from .policy.observation import OBS_DIM, build_observation
from .policy.replay import ReplayBuffer
from .policy.sac import SacAgent, smooth_action
from .reward import total_reward
from .world.autopilot import AutopilotParams, autopilot_control
from .world.mapgraph import MapGraph, build_map
from .world.routing import NoRouteError, Route, plan_route
from .world.state import EGO_ID, WorldState, lane_metrics, spawn_world, write_trace_line
from .world.vehicle import step_vehicle

ACT_DIM = 2


def subsystem_seed(master: int, name: str, index: int = 0) -> int:
    """Stable per-subsystem seed stream; independent of call order and process."""
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "big")
    ss = np.random.SeedSequence([master & 0x7FFFFFFF, tag, index])
    return int(ss.generate_state(1)[0])


@dataclass
class EpisodeResult:
    kind: str                    # "normal" | "challenging"
    downgraded: bool
    steps: int
    completion: float            # [0, 1]
    distance: float              # m
    collisions: int              # ego-involved collision events
    collision_speeds: list[float] = field(default_factory=list)   # m/s
    mean_speed: float = 0.0      # m/s
    total_return: float = 0.0
    termination: str = "cap"     # collision | offroad | complete | cap
    editor_calls: int = 0

    def to_record(self) -> dict:
        return {
            "kind": self.kind, "downgraded": self.downgraded, "steps": self.steps,
            "completion": round(self.completion, 6), "distance": round(self.distance, 3),
            "collisions": self.collisions,
            "collision_speeds": [round(s, 4) for s in self.collision_speeds],
            "mean_speed": round(self.mean_speed, 4),
            "total_return": round(self.total_return, 6),
            "termination": self.termination, "editor_calls": self.editor_calls,
        }


class RandomPolicy:
    """Uniform actions; the evaluation floor."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=ACT_DIM)


class ScriptedStraightPolicy:
    """Holds the lane with zero steering and gentle throttle."""

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        return np.array([0.0, 0.4])


def build_editor(cfg: RunConfig, seed: int = 0) -> Editor:
    kind = cfg.editor.kind
    if kind == "rule":
        return RuleBasedEditor(cfg.rule_editor, seed=seed)
    if kind == "vlm":
        return RemoteEditor(cfg.remote_editor)
    if kind == "direct":
        if cfg.remote_editor.endpoint:
            return DirectGenerationEditor(cfg.remote_editor)
        return OfflineDirectEditor()
    if kind == "fixture":
        return FixtureEditor(FixtureStore.load(cfg.editor.fixture_path), cfg.remote_editor)
    raise ValueError(f"unknown editor kind {kind!r}")


def training_map(cfg: RunConfig) -> MapGraph:
    t = cfg.trainer
    if t.map_preset == "straight":
        doc = {"version": "map/v1", "preset": "straight", "length": t.map_length,
               "width": cfg.scene.lane_width, "lanes_per_direction": t.map_lanes}
    else:
        doc = {"version": "map/v1", "preset": t.map_preset, "length": t.map_length,
               "width": cfg.scene.lane_width}
    return build_map(doc)


def _sample_route(world: WorldState, rng: np.random.Generator, tries: int = 20) -> Route:
    """A route for the ego: random reachable goal, longest candidate wins."""
    graph = world.graph
    start = world.ego.position()
    lane_ids = sorted(graph.lanes)
    best: Route | None = None
    for _ in range(tries):
        lane = graph.lanes[lane_ids[int(rng.integers(len(lane_ids)))]]
        goal_arc = float(rng.uniform(0.25, 0.95)) * lane.length
        goal = lane.point_at(goal_arc)
        try:
            route = plan_route(graph, start, goal)
        except NoRouteError:
            continue
        if route.length >= 20.0 and (best is None or route.length > best.length):
            best = route
        if best is not None and best.length > 100.0:
            break
    if best is not None:
        return best
    # fall back to the remainder of the current lane
    lane = graph.lanes[world.ego.lane_id]
    return plan_route(graph, start, lane.point_at(max(lane.length - 2.0, 1.0)))


@dataclass
class _Playback:
    states: list
    cursor: int = 0

    def done(self) -> bool:
        return self.cursor >= len(self.states)


def run_episode(cfg: RunConfig, graph: MapGraph, policy, kind: str, editor: Editor | None,
                seed: int, on_transition=None, deterministic_policy: bool = False,
                trace_fh=None, collect_pipeline=None) -> EpisodeResult:
    """One episode. `on_transition(obs, act, rew, next_obs, done)` feeds training."""
    world = spawn_world(graph, cfg.world.n_agents, subsystem_seed(seed, "world"),
                        fps=cfg.world.fps, min_gap=cfg.world.min_gap, plant=cfg.plant)
    route_rng = np.random.default_rng(subsystem_seed(seed, "route"))
    route = _sample_route(world, route_rng)
    maneuver_rng = np.random.default_rng(subsystem_seed(seed, "maneuver"))

    agent_routes: dict[str, Route] = {}
    for aid, v in sorted(world.agents.items()):
        lane = graph.lanes[v.lane_id]
        goal = lane.point_at(max(lane.length - 2.0, min(1.0, lane.length / 2)))
        try:
            agent_routes[aid] = plan_route(graph, v.position(), goal)
        except NoRouteError:
            agent_routes[aid] = Route(np.vstack([v.position(),
                                                 v.position() + v.velocity() + 1e-3]), 1.0)
    cruise = {aid: float(world.rng.uniform(3.0, 8.0)) for aid in sorted(world.agents)}

    history: dict[str, list] = {vid: [] for vid in world.all_vehicles()}
    lateral_history: deque = deque(maxlen=cfg.reward.stability_window)
    playback: _Playback | None = None
    challenging_enabled = kind == "challenging" and editor is not None
    downgraded = False
    editor_calls = 0

    result = EpisodeResult(kind=kind, downgraded=False, steps=0, completion=0.0,
                           distance=0.0, collisions=0)
    speeds: list[float] = []
    prev_action: np.ndarray | None = None
    obs = build_observation(world, route)
    prev_pos = world.ego.position()

    max_edits = cfg.trainer.max_edits_per_episode
    for step in range(cfg.trainer.episode_step_cap):
        # adversary management
        if challenging_enabled and (playback is None or playback.done()) \
                and (max_edits <= 0 or editor_calls < max_edits):
            if playback is not None and playback.done():
                playback = None
                world.risky_id = None
            try:
                pipe = run_edit_pipeline(world, cfg, editor, maneuver_rng, history=history)
            except Exception:
                # scene unusable or editor hard failure: downgrade to normal
                # traffic for the rest of the episode
                pipe = None
                downgraded = True
                challenging_enabled = False
            if pipe is not None:
                editor_calls += 1
                playback = _Playback(states=pipe.rollout.states)
                world.risky_id = pipe.risky_id
                if collect_pipeline is not None:
                    collect_pipeline(pipe)

        raw = np.asarray(policy.act(obs, deterministic=deterministic_policy), dtype=float)
        action = smooth_action(prev_action, raw, cfg.sac.action_smoothing)
        prev_action = action

        # record history before moving
        for vid, v in world.all_vehicles().items():
            h = history.setdefault(vid, [])
            h.append((v.x, v.y))
            if len(h) > cfg.scene.past_window:
                del h[0]

        world.ego = step_vehicle(world.ego, float(action[0]), float(action[1]),
                                 world.dt, cfg.plant)
        for aid in sorted(world.agents):
            if playback is not None and aid == world.risky_id and not playback.done():
                world.agents[aid] = playback.states[playback.cursor].copy()
                continue
            v = world.agents[aid]
            others = [o for oid, o in world.all_vehicles().items() if oid != aid]
            ap = AutopilotParams(cruise_speed=cruise[aid],
                                 sensing_range=cfg.autopilot.sensing_range,
                                 gap_stop=cfg.autopilot.gap_stop,
                                 gap_headway=cfg.autopilot.gap_headway)
            steer, accel = autopilot_control(v, agent_routes[aid], others, ap, cfg.plant)
            world.agents[aid] = step_vehicle(v, steer, accel, world.dt, cfg.plant)
        if playback is not None and not playback.done():
            playback.cursor += 1
        world.time_step += 1
        world.localize_all()

        breakdown, terminal = total_reward(world, route, lateral_history, cfg.reward,
                                           cfg.autopilot)
        lateral_history.append(lane_metrics(world.ego, graph).lateral_offset)

        next_obs = build_observation(world, route)
        pos = world.ego.position()
        result.distance += float(np.linalg.norm(pos - prev_pos))
        prev_pos = pos
        speeds.append(world.ego.speed)
        result.total_return += breakdown.total
        result.steps = step + 1

        ego_hits = [c for c in world.collisions() if EGO_ID in c[:2]]
        if ego_hits:
            result.collisions += len(ego_hits)
            result.collision_speeds.extend(c[2] for c in ego_hits)

        done = terminal or step == cfg.trainer.episode_step_cap - 1
        progress = route.progress(pos)
        completed = progress >= route.length - 1e-6
        if completed:
            done = True

        if trace_fh is not None:
            write_trace_line(trace_fh, world)
        if on_transition is not None:
            on_transition(obs, action, breakdown.total, next_obs, terminal)
        obs = next_obs

        if done:
            if ego_hits:
                result.termination = "collision"
            elif breakdown.terminal_penalty > 0:
                result.termination = "offroad"
            elif completed:
                result.termination = "complete"
            else:
                result.termination = "cap"
            result.completion = min(progress / route.length, 1.0) if route.length > 0 else 0.0
            break
    else:
        result.completion = min(route.progress(world.ego.position()) / route.length, 1.0)

    result.downgraded = downgraded
    result.mean_speed = float(np.mean(speeds)) if speeds else 0.0
    result.editor_calls = editor_calls
    return result


# ---------------------------------------------------------------------------
# training loop


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainState:
    env_step: int = 0
    episode: int = 0


def episode_kind(episode_index: int, k: int) -> str:
    return "challenging" if episode_index % (k + 1) == k else "normal"


def save_checkpoint(path: str | Path, cfg: RunConfig, agent: SacAgent,
                    buffer: ReplayBuffer, state: TrainState) -> None:
    arrays: dict[str, np.ndarray] = {}
    arrays.update(ckpt.module_arrays("actor", agent.actor))
    arrays.update(ckpt.module_arrays("critic", agent.critic))
    arrays.update(ckpt.module_arrays("critic_target", agent.critic_target))
    arrays["log_alpha"] = agent.log_alpha.detach().numpy().copy()
    arrays.update(ckpt.optimizer_arrays("opt_actor", agent.actor_opt))
    arrays.update(ckpt.optimizer_arrays("opt_critic", agent.critic_opt))
    arrays.update(ckpt.optimizer_arrays("opt_alpha", agent.alpha_opt))
    arrays["torch_rng"] = agent.torch_gen.get_state().numpy().copy()
    if cfg.trainer.persist_buffer:
        for k, v in buffer.state_arrays().items():
            arrays[f"buffer.{k}"] = v
    meta = {
        "env_step": state.env_step,
        "episode": state.episode,
        "updates_done": agent.updates_done,
        "buffer_rng": json.dumps(buffer.rng.bit_generator.state, default=str),
        "buffer_persisted": bool(cfg.trainer.persist_buffer),
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "config": config_digest_dict(cfg),
    }
    ckpt.save_arrays(path, arrays, meta)


def load_checkpoint(path: str | Path, cfg: RunConfig, agent: SacAgent,
                    buffer: ReplayBuffer | None, restore_buffer: bool = True) -> TrainState:
    arrays, meta = ckpt.load_arrays(path)
    if meta.get("obs_dim") != agent.obs_dim or meta.get("act_dim") != agent.act_dim:
        raise ckpt.CheckpointError("checkpoint dimensions do not match the agent")
    ckpt.restore_module("actor", agent.actor, arrays)
    ckpt.restore_module("critic", agent.critic, arrays)
    ckpt.restore_module("critic_target", agent.critic_target, arrays)
    agent.log_alpha.data = torch.as_tensor(arrays["log_alpha"], dtype=agent.log_alpha.dtype)
    agent.torch_gen.set_state(torch.as_tensor(arrays["torch_rng"]))
    ckpt.restore_optimizer("opt_actor", agent.actor_opt, arrays)
    ckpt.restore_optimizer("opt_critic", agent.critic_opt, arrays)
    ckpt.restore_optimizer("opt_alpha", agent.alpha_opt, arrays)
    agent.updates_done = int(meta.get("updates_done", 0))
    if restore_buffer and buffer is not None:
        if meta.get("buffer_persisted"):
            buf_arrays = {k[len("buffer."):]: v for k, v in arrays.items()
                          if k.startswith("buffer.")}
            if buf_arrays:
                buffer.restore_arrays(buf_arrays)
        buffer.rng.bit_generator.state = _intify(json.loads(meta["buffer_rng"]))
    return TrainState(env_step=int(meta["env_step"]), episode=int(meta["episode"]))


def _intify(doc):
    if isinstance(doc, dict):
        return {k: _intify(v) for k, v in doc.items()}
    if isinstance(doc, str) and doc.lstrip("-").isdigit():
        return int(doc)
    return doc


def train(cfg: RunConfig, out_dir: str | Path, resume_from: str | Path | None = None,
          log_every: int = 0, max_episodes: int | None = None,
          trace_pipeline: bool = False) -> Path:
    """Run training to cfg.sac.total_steps; returns the final checkpoint path.

    `max_episodes` stops early (e.g. for interruption tests) without touching
    the schedule, which depends on total_steps. `trace_pipeline` logs every
    editing stage of every adversarial scene to pipeline_traces.jsonl.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = training_map(cfg)
    agent = SacAgent(OBS_DIM, ACT_DIM, cfg.sac, seed=subsystem_seed(cfg.seed, "policy"))
    buffer = ReplayBuffer(cfg.sac.buffer_capacity, OBS_DIM, ACT_DIM,
                          seed=subsystem_seed(cfg.seed, "replay"))
    editor = build_editor(cfg, seed=subsystem_seed(cfg.seed, "editor"))
    state = TrainState()
    if resume_from is not None:
        state = load_checkpoint(resume_from, cfg, agent, buffer)

    log_path = out / "training_log.jsonl"
    log_fh = open(log_path, "a" if resume_from is not None else "w")
    sac = cfg.sac
    last_ckpt = out / "checkpoint_final.ckpt"

    pipe_fh = None
    collect_pipeline = None
    if trace_pipeline:
        pipe_fh = open(out / "pipeline_traces.jsonl",
                       "a" if resume_from is not None else "w")

        def collect_pipeline(pipe) -> None:
            rec = {
                "episode": state.episode,
                "risky_id": pipe.risky_id,
                "maneuver": pipe.maneuver.value,
                "feasible": pipe.feasibility.within_limits,
                "stages": {stage.value: traj.to_record()
                           for stage, traj in pipe.stages.items()},
            }
            pipe_fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def on_transition(obs, act, rew, next_obs, done) -> None:
        buffer.add(obs, act, rew, next_obs, done)
        state.env_step += 1
        if (state.env_step >= sac.learning_starts
                and state.env_step % sac.train_frequency == 0
                and buffer.size >= sac.batch_size):
            for _ in range(sac.gradient_steps):
                agent.update(buffer, state.env_step)

    try:
        while state.env_step < sac.total_steps:
            if max_episodes is not None and state.episode >= max_episodes:
                break
            kind = episode_kind(state.episode, cfg.trainer.alternation_k)
            ep_seed = subsystem_seed(cfg.seed, "episode", state.episode)
            res = run_episode(cfg, graph, agent, kind, editor, ep_seed,
                              on_transition=on_transition,
                              collect_pipeline=collect_pipeline)
            rec = {"episode": state.episode, "env_step": state.env_step}
            rec.update(res.to_record())
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            if log_every and state.episode % log_every == 0:
                log_fh.flush()
                print(f"episode {state.episode} ({kind}): return "
                      f"{res.total_return:.2f}, steps {state.env_step}")
            state.episode += 1
            if cfg.trainer.checkpoint_interval_episodes > 0 and \
                    state.episode % cfg.trainer.checkpoint_interval_episodes == 0:
                save_checkpoint(out / f"checkpoint_ep{state.episode:06d}.ckpt",
                                cfg, agent, buffer, state)
    except FloatingPointError as e:
        raise TrainingAborted(f"training aborted on non-finite signal: {e}") from e
    finally:
        log_fh.close()
        if pipe_fh is not None:
            pipe_fh.close()

    save_checkpoint(last_ckpt, cfg, agent, buffer, state)
    return last_ckpt
