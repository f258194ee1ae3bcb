"""Expert panel: personas, conversation backends, prompts, reply parsing."""

from .personas import ExpertPersona, load_personas, parse_personas_reply
from .prompts import PromptTemplate, load_templates, render_prompt, template_versions
from .backends import (
    Conversation,
    Message,
    ScriptedBackend,
    ReplayBackend,
    LiveBackend,
    RecordingBackend,
    converse,
    rotate_conversation,
    estimate_tokens,
)
from .costs import Pricing, CostReport, estimate_cost
from .repair import ask_structured

__all__ = [
    "ExpertPersona", "load_personas", "parse_personas_reply",
    "PromptTemplate", "load_templates", "render_prompt", "template_versions",
    "Conversation", "Message", "ScriptedBackend", "ReplayBackend", "LiveBackend",
    "RecordingBackend", "converse", "rotate_conversation", "estimate_tokens",
    "Pricing", "CostReport", "estimate_cost", "ask_structured",
]
