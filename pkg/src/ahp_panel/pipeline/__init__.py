"""Resumable decision pipeline: stages, session persistence, reporting."""

from .config import PipelineConfig, load_config
from .session import SessionState, STAGES, SCHEMA_VERSION
from .runner import PipelineRunner
from .report import build_report, render_markdown, canonical_json

__all__ = [
    "PipelineConfig", "load_config",
    "SessionState", "STAGES", "SCHEMA_VERSION",
    "PipelineRunner",
    "build_report", "render_markdown", "canonical_json",
]
