"""Tolerant extraction of the editor's JSON reply from free-form model text."""

from __future__ import annotations

import json

import numpy as np

from .base import EditorResponse, ResponseValidationError, validate_response


class ResponseParseError(ValueError):
    """No well-formed JSON object could be extracted from the reply."""


def _candidate_objects(text: str):
    """Yield parsed JSON objects found in the text, first occurrence first."""
    depth = 0
    start = None
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0 and start is not None:
                    chunk = text[start:i + 1]
                    try:
                        # strict=False tolerates raw newlines inside strings,
                        # which chat models produce routinely
                        yield json.loads(chunk, strict=False)
                    except json.JSONDecodeError:
                        pass
                    start = None


def parse_response(text: str, n: int) -> EditorResponse:
    """First well-formed reply object in `text`, validated against horizon n.

    Surrounding prose and markdown code fences are ignored. A top-level
    {"response": {...}} wrapper is unwrapped.
    """
    for obj in _candidate_objects(text):
        if not isinstance(obj, dict):
            continue
        payload = obj.get("response") if isinstance(obj.get("response"), dict) else obj
        if "waypoints" not in payload:
            continue
        try:
            waypoints = np.asarray(payload["waypoints"], dtype=float)
        except (TypeError, ValueError) as e:
            raise ResponseValidationError(f"waypoints are not numeric: {e}") from e
        resp = EditorResponse(
            risk_level=str(payload.get("risk_level", "")),
            risk_category=str(payload.get("risk_category", "")),
            is_intersection=bool(payload.get("is_intersection", False)),
            analysis=str(payload.get("analysis", "")),
            waypoints=waypoints,
        )
        return validate_response(resp, n)
    raise ResponseParseError("no JSON object with a 'waypoints' field found in the reply")
