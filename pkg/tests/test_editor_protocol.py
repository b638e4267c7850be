from __future__ import annotations

import numpy as np
import pytest

from nearmiss.editor.base import ResponseValidationError
from nearmiss.editor.parsing import ResponseParseError, parse_response
from nearmiss.editor.prompt import build_prompt
from conftest import make_request


def test_prompt_contains_required_pieces():
    req = make_request(maneuver="sudden-brake", category="same_ahead")
    text = build_prompt(req)
    assert "risk_level" in text
    assert "risk_category" in text
    assert "is_intersection" in text
    assert "waypoints" in text
    assert "40" in text
    assert "white" in text and "yellow" in text and "magenta" in text
    assert "greater freedom to generate diverse risky trajectories" in text
    assert "same_ahead" in text
    assert "sudden-brake" in text


def test_prompt_deterministic():
    req = make_request()
    assert build_prompt(req) == build_prompt(req)


def test_prompt_without_base_omits_table():
    req = make_request()
    with_base = build_prompt(req, include_base=True)
    without = build_prompt(req, include_base=False)
    assert "base trajectory" in with_base
    assert "base trajectory" not in without
    assert "from scratch" in without


def test_parse_verbatim_sample(sample_reply_text):
    resp = parse_response(sample_reply_text, 40)
    assert resp.risk_level == "High"
    assert resp.risk_category == "u-turn"
    assert resp.is_intersection is True
    assert len(resp.waypoints) == 40
    assert resp.waypoints[0] == pytest.approx([0.000, 0.500])
    assert resp.waypoints[-1] == pytest.approx([8.000, -13.000])
    assert "U-turn" in resp.analysis


def test_parse_wrong_count_rejected(sample_reply_text):
    with pytest.raises(ResponseValidationError, match="39"):
        parse_response(sample_reply_text, 39)


def test_parse_fenced_with_prose(sample_reply_text):
    wrapped = ("Sure, here is the edited trajectory you asked for:\n\n"
               "```json\n" + sample_reply_text + "\n```\n\nLet me know if "
               "anything else is needed.")
    a = parse_response(wrapped, 40)
    b = parse_response(sample_reply_text, 40)
    assert np.array_equal(a.waypoints, b.waypoints)
    assert a.risk_level == b.risk_level


def test_parse_unwrapped_object():
    text = ('{"risk_level": "Medium", "risk_category": "overtake", '
            '"is_intersection": false, "analysis": "x", '
            '"waypoints": [[0.1, 0.2], [0.3, 0.4]]}')
    resp = parse_response(text, 2)
    assert resp.risk_level == "Medium"
    assert resp.waypoints[1][1] == 0.4


def test_parse_no_object_raises():
    with pytest.raises(ResponseParseError):
        parse_response("no json here at all", 40)


def test_parse_bad_risk_level_rejected():
    text = '{"risk_level": "Extreme", "waypoints": [[0, 0], [1, 1]]}'
    with pytest.raises(ResponseValidationError, match="risk_level"):
        parse_response(text, 2)


def test_parse_nonfinite_rejected():
    text = '{"risk_level": "Low", "waypoints": [[0, 0], [1, Infinity]]}'
    with pytest.raises((ResponseValidationError, ResponseParseError)):
        parse_response(text, 2)


def test_parse_skips_decoys():
    text = ('First, {"not": "the reply"} and then the real one: '
            '{"risk_level": "Low", "risk_category": "c", "is_intersection": false, '
            '"analysis": "", "waypoints": [[1, 2], [3, 4]]}')
    resp = parse_response(text, 2)
    assert resp.waypoints[0][0] == 1.0
