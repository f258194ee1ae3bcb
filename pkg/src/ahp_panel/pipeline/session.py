"""Checkpointed session state for the pipeline.

A session is a versioned JSON document: config, stage cursor, per-stage
artifacts, and the conversation archive. Artifacts are immutable once their
stage is checkpointed; writes are atomic (temp file + rename) so an
interrupted run resumes from the last completed stage.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from ..errors import DataError
from .config import PipelineConfig

SCHEMA_VERSION = "ahp-panel-session/1"

STAGES = (
    "init", "advise", "personas", "criteria", "subcriteria", "alternatives",
    "pairwise_top", "pairwise_sub", "pairwise_alt", "aggregate", "synthesize",
    "done",
)


def stage_index(stage: str) -> int:
    try:
        return STAGES.index(stage)
    except ValueError:
        raise DataError(f"unknown stage {stage!r}")


class SessionState:
    def __init__(self, config: PipelineConfig, cursor: str = "init",
                 artifacts: dict | None = None, conversations: dict | None = None,
                 path=None):
        self.config = config
        self.cursor = cursor
        self.artifacts = artifacts or {}
        # {"active": {persona_id: conversation dict}, "archived": [conversation dicts]}
        self.conversations = conversations or {"active": {}, "archived": {}}
        self.path = Path(path) if path else None
        stage_index(cursor)

    @property
    def done(self) -> bool:
        return self.cursor == "done"

    def completed(self, stage: str) -> bool:
        return stage_index(stage) < stage_index(self.cursor)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "cursor": self.cursor,
            "artifacts": self.artifacts,
            "conversations": self.conversations,
            "deterministic": True,
        }

    @classmethod
    def from_dict(cls, d: dict, path=None) -> "SessionState":
        schema = d.get("schema")
        if schema != SCHEMA_VERSION:
            raise DataError(
                f"unsupported session schema {schema!r}; this build reads {SCHEMA_VERSION!r}")
        return cls(
            config=PipelineConfig.from_dict(d["config"]),
            cursor=d["cursor"],
            artifacts=d.get("artifacts", {}),
            conversations=d.get("conversations", {"active": {}, "archived": {}}),
            path=path,
        )

    @classmethod
    def load(cls, path) -> "SessionState":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read session {path}: {exc}") from exc
        return cls.from_dict(doc, path=path)

    def save(self, path=None) -> None:
        """Atomic write: the file never holds a half-written session."""
        target = Path(path) if path else self.path
        if target is None:
            return
        self.path = target
        payload = json.dumps(self.to_dict(), indent=2, sort_keys=True,
                             ensure_ascii=False) + "\n"
        fd, tmp = tempfile.mkstemp(dir=str(target.parent), prefix=target.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, target)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
