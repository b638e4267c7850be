"""Remote editor speaking a generic chat-completion wire shape.

The request carries the prompt plus the BEV image as one attachment. All
transport and parsing failures degrade to the base-trajectory fallback after
the configured retries; only configuration problems raise.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable

from .base import Editor, EditorConfigError, EditorRequest, EditorResponse, fallback_response
from .parsing import ResponseParseError, ResponseValidationError, parse_response
from .prompt import build_prompt


@dataclass
class RemoteEditorConfig:
    endpoint: str = ""
    credential_env: str = "NEARMISS_EDITOR_KEY"
    timeout_s: float = 30.0
    retries: int = 2
    backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0)
    model: str = "editor-model"
    max_in_flight: int = 1

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise EditorConfigError("timeout_s must be positive")
        if self.retries < 0:
            raise EditorConfigError("retries must be >= 0")


class TransportError(RuntimeError):
    """Network failure or HTTP 5xx; retried, never propagated."""


def build_wire_request(req: EditorRequest, cfg: RemoteEditorConfig,
                       include_base: bool = True) -> dict:
    prompt = build_prompt(req, include_base=include_base)
    image_b64 = base64.b64encode(req.scene.bev_png).decode("ascii")
    return {
        "model": cfg.model,
        "messages": [
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {"type": "image_url",
                     "image_url": {"url": f"data:image/png;base64,{image_b64}"}},
                ],
            }
        ],
    }


def _http_post(cfg: RemoteEditorConfig) -> Callable[[dict], str]:
    import requests

    key = os.environ.get(cfg.credential_env, "")
    if not key:
        raise EditorConfigError(
            f"credential environment variable {cfg.credential_env!r} is not set")
    if not cfg.endpoint:
        raise EditorConfigError("remote editor endpoint is not configured")

    def post(body: dict) -> str:
        try:
            r = requests.post(cfg.endpoint, json=body, timeout=cfg.timeout_s,
                              headers={"Authorization": f"Bearer {key}"})
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if r.status_code >= 500:
            raise TransportError(f"server error {r.status_code}")
        if r.status_code != 200:
            raise TransportError(f"unexpected status {r.status_code}")
        try:
            return r.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as e:
            raise TransportError(f"malformed completion body: {e}") from e

    return post


class RemoteEditor(Editor):
    """Edits via the remote model; `include_base=False` generates from scratch."""

    name = "vlm"

    def __init__(self, cfg: RemoteEditorConfig,
                 post: Callable[[dict], str] | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 include_base: bool = True):
        self.cfg = cfg
        self._post = post if post is not None else _http_post(cfg)
        self._sleep = sleep
        self.include_base = include_base
        self.attempts_log: list[int] = []
        self._in_flight = threading.Semaphore(max(cfg.max_in_flight, 1))

    def edit(self, req: EditorRequest) -> EditorResponse:
        body = build_wire_request(req, self.cfg, include_base=self.include_base)
        attempts = 0
        for attempt in range(self.cfg.retries + 1):
            attempts += 1
            try:
                with self._in_flight:
                    text = self._post(body)
                resp = parse_response(text, req.n)
                self.attempts_log.append(attempts)
                return resp
            except (TransportError, ResponseParseError, ResponseValidationError):
                if attempt < self.cfg.retries:
                    delay = self.cfg.backoff_s[min(attempt, len(self.cfg.backoff_s) - 1)] \
                        if self.cfg.backoff_s else 0.0
                    self._sleep(delay)
        self.attempts_log.append(attempts)
        return fallback_response(req)


class DirectGenerationEditor(RemoteEditor):
    """Same transport, but the prompt omits the base trajectory entirely."""

    name = "direct"

    def __init__(self, cfg: RemoteEditorConfig,
                 post: Callable[[dict], str] | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__(cfg, post=post, sleep=sleep, include_base=False)


class OfflineDirectEditor(Editor):
    """Offline stand-in for direct generation: constant-turn-rate rollout of
    the risky agent's current motion, tagged low risk."""

    name = "direct-offline"

    def edit(self, req: EditorRequest) -> EditorResponse:
        from ..trajgen import ctrv_points

        s = req.scene.risky
        pts = ctrv_points(0.0, 0.0, 0.0, s.speed, s.yaw_rate, req.n, 1.0 / req.fps)
        return EditorResponse(
            risk_level="Low",
            risk_category=req.scene.risk_category,
            is_intersection=req.scene.is_intersection_hint,
            analysis="offline direct generation: constant turn rate and speed",
            waypoints=pts,
        )
