"""Run configuration (`run/v1`): one document covering every tunable default.

Unknown keys are rejected during load so config drift fails fast.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .editor.remote import RemoteEditorConfig
from .editor.rule import RuleEditorParams
from .policy.sac import SacConfig
from .postproc import LqrParams, SigmoidFuseParams
from .reward import RewardWeights
from .world.autopilot import AutopilotParams
from .world.vehicle import BicycleParams

RUN_VERSION = "run/v1"


class ConfigError(ValueError):
    pass


@dataclass
class WorldConfig:
    n_agents: int = 20
    min_gap: float = 12.0
    fps: float = 15.0


@dataclass
class SceneConfig:
    zone_radius: float = 30.0
    bev_scale: float = 0.25
    bev_width: int = 80
    bev_height: int = 120
    past_window: int = 15
    lane_width: float = 3.5


@dataclass
class TrajgenConfig:
    horizon: int = 40


@dataclass
class EditorConfig:
    kind: str = "rule"              # rule | vlm | direct | fixture
    fixture_path: str = ""


@dataclass
class PostprocConfig:
    spline_degree: int = 3
    spline_smoothing: float = 0.5
    spline_knot_spacing: int = 5
    sigmoid_weight_factor: float = 6.0


@dataclass
class TrainerConfig:
    alternation_k: int = 2          # normal episodes per challenging one
    episode_step_cap: int = 1000
    max_edits_per_episode: int = 0  # 0 = re-trigger freely on zone re-entry
    checkpoint_interval_episodes: int = 50
    persist_buffer: bool = True
    map_preset: str = "straight"
    map_length: float = 300.0
    map_lanes: int = 2


@dataclass
class RunConfig:
    seed: int = 0
    world: WorldConfig = field(default_factory=WorldConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    trajgen: TrajgenConfig = field(default_factory=TrajgenConfig)
    editor: EditorConfig = field(default_factory=EditorConfig)
    rule_editor: RuleEditorParams = field(default_factory=RuleEditorParams)
    remote_editor: RemoteEditorConfig = field(default_factory=RemoteEditorConfig)
    postproc: PostprocConfig = field(default_factory=PostprocConfig)
    lqr: LqrParams = field(default_factory=LqrParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    sac: SacConfig = field(default_factory=SacConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    plant: BicycleParams = field(default_factory=BicycleParams)
    autopilot: AutopilotParams = field(default_factory=AutopilotParams)

    @property
    def sigmoid(self) -> SigmoidFuseParams:
        return SigmoidFuseParams(weight_factor=self.postproc.sigmoid_weight_factor)


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    defaults = cls()
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{where}: unknown key '{key}'")
        current = getattr(defaults, key)
        if dataclasses.is_dataclass(current):
            kwargs[key] = _from_dict(type(current), value, f"{where}.{key}")
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _to_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = _to_dict(v)
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config is not valid YAML: {e}") from e
        version = doc.pop("version", RUN_VERSION)
        if version != RUN_VERSION:
            raise ConfigError(f"expected {RUN_VERSION} config, got {version!r}")
    if overrides:
        doc = _deep_merge(doc, overrides)
    cfg = _from_dict(RunConfig, doc, "config")
    _validate(cfg)
    return cfg


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _validate(cfg: RunConfig) -> None:
    if cfg.editor.kind not in ("rule", "vlm", "direct", "fixture"):
        raise ConfigError(f"editor.kind must be rule|vlm|direct|fixture, got {cfg.editor.kind!r}")
    if cfg.editor.kind == "fixture" and not cfg.editor.fixture_path:
        raise ConfigError("editor.kind 'fixture' needs editor.fixture_path")
    if cfg.trainer.alternation_k < 1:
        raise ConfigError("trainer.alternation_k must be >= 1")
    if cfg.trajgen.horizon < 2:
        raise ConfigError("trajgen.horizon must be >= 2")
    if not math.isfinite(cfg.world.fps) or cfg.world.fps <= 0:
        raise ConfigError("world.fps must be positive")


def config_to_yaml(cfg: RunConfig) -> str:
    doc = {"version": RUN_VERSION}
    doc.update(_to_dict(cfg))
    return yaml.safe_dump(doc, sort_keys=True)


def config_digest_dict(cfg: RunConfig) -> dict:
    return json.loads(json.dumps({"version": RUN_VERSION, **_to_dict(cfg)}, sort_keys=True))
