from .base import (
    Editor,
    EditorConfigError,
    EditorRequest,
    EditorResponse,
    IdentityEditor,
    ResponseValidationError,
    fallback_response,
    validate_response,
)
from .fixtures import FIXTURE_VERSION, FixtureEditor, FixtureStore
from .parsing import ResponseParseError, parse_response
from .prompt import build_prompt
from .remote import (
    DirectGenerationEditor,
    OfflineDirectEditor,
    RemoteEditor,
    RemoteEditorConfig,
    TransportError,
    build_wire_request,
)
from .rule import RuleBasedEditor, RuleEditorParams

__all__ = [
    "Editor", "EditorConfigError", "EditorRequest", "EditorResponse",
    "IdentityEditor", "ResponseValidationError", "fallback_response",
    "validate_response",
    "FIXTURE_VERSION", "FixtureEditor", "FixtureStore",
    "ResponseParseError", "parse_response", "build_prompt",
    "DirectGenerationEditor", "OfflineDirectEditor", "RemoteEditor",
    "RemoteEditorConfig", "TransportError", "build_wire_request",
    "RuleBasedEditor", "RuleEditorParams",
]
