"""Recorded-reply store for hermetic remote-editor runs (`vlmfix/v1`).

Keys are the SHA-256 of the canonical wire request; the canonical request is
stored alongside the reply, so distinct requests can never silently share an
entry even under a hash collision.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .base import Editor, EditorRequest, EditorResponse, fallback_response
from .parsing import ResponseParseError, ResponseValidationError, parse_response
from .remote import RemoteEditorConfig, build_wire_request

FIXTURE_VERSION = "vlmfix/v1"


def canonical_request(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def request_key(body: dict) -> str:
    return hashlib.sha256(canonical_request(body).encode()).hexdigest()


class FixtureStore:
    def __init__(self, entries: dict[str, dict] | None = None):
        self.entries = entries or {}

    @classmethod
    def load(cls, path: str | Path) -> "FixtureStore":
        doc = json.loads(Path(path).read_text())
        if doc.get("version") != FIXTURE_VERSION:
            raise ValueError(f"expected {FIXTURE_VERSION} file, got {doc.get('version')!r}")
        return cls({e["key"]: e for e in doc.get("entries", [])})

    def save(self, path: str | Path) -> None:
        doc = {
            "version": FIXTURE_VERSION,
            "entries": [self.entries[k] for k in sorted(self.entries)],
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")

    def put(self, body: dict, response_text: str) -> str:
        key = request_key(body)
        self.entries[key] = {
            "key": key,
            "request": canonical_request(body),
            "response": response_text,
        }
        return key

    def get(self, body: dict) -> str | None:
        entry = self.entries.get(request_key(body))
        if entry is None:
            return None
        if entry["request"] != canonical_request(body):
            raise ValueError("fixture key collision: stored request differs")
        return entry["response"]


class FixtureEditor(Editor):
    """Replays recorded replies; unmatched requests fall back to the base."""

    name = "fixture"

    def __init__(self, store: FixtureStore, cfg: RemoteEditorConfig | None = None,
                 include_base: bool = True):
        self.store = store
        self.cfg = cfg or RemoteEditorConfig()
        self.include_base = include_base
        self.misses = 0

    def edit(self, req: EditorRequest) -> EditorResponse:
        body = build_wire_request(req, self.cfg, include_base=self.include_base)
        text = self.store.get(body)
        if text is None:
            self.misses += 1
            return fallback_response(req, reason="fallback: no fixture for request")
        try:
            return parse_response(text, req.n)
        except (ResponseParseError, ResponseValidationError):
            return fallback_response(req, reason="fallback: fixture reply invalid")
