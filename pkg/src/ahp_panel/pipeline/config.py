"""Pipeline configuration and the key=value config file format.

The config file is INI-style with four sections; unknown sections or keys
are hard errors so typos surface before an expensive live run. Paths may
use the ``pkg:`` prefix to reference files bundled with the package.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

from ..errors import UsageError

DEFAULT_SCALE_INSTRUCTIONS = (
    "from 1 to 9, with 1 being lowest importance to 9 being highest importance")


def resolve_path(value: str, base: Path | None = None) -> str:
    """Resolve ``pkg:name`` to the bundled fixture, else relative to ``base``."""
    if value.startswith("pkg:"):
        return str(resources.files("ahp_panel") / "fixtures" / value[4:])
    path = Path(value)
    if base is not None and not path.is_absolute():
        return str((base / path).resolve())
    return str(path)


@dataclass
class PipelineConfig:
    goal: str
    expert_count: int = 7
    levels: int = 2
    top_criteria_count: int = 7
    sub_per_criterion: int = 3
    alternatives_per_expert: int = 5
    final_alternative_count: int = 5
    aggregation: str = "geometric"
    cr_threshold: float = 0.1
    strict_consistency: bool = False
    parallelism: int = 1
    max_repairs: int = 2
    matrix_batch_size: int = 3
    max_label_words: int = 3
    run_advise: bool = True
    personas_file: str | None = None

    backend_kind: str = "scripted"
    backend_settings: dict = field(default_factory=dict)

    pricing_input_per_1k: str = "0.06"
    pricing_output_per_1k: str = "0.12"
    pricing_blended_per_1k: str = "0.10"

    context_budget: int = 8192
    rotation_threshold: float = 0.9
    tokens_per_word: float = 0.75

    def __post_init__(self):
        if not str(self.goal).strip():
            raise UsageError("config needs a non-empty goal")
        if self.expert_count < 2:
            raise UsageError("expert_count must be >= 2")
        for name in ("top_criteria_count", "sub_per_criterion",
                     "alternatives_per_expert", "final_alternative_count"):
            if getattr(self, name) < 2:
                raise UsageError(f"{name} must be >= 2")
        if self.levels != 2:
            raise UsageError("only two criteria levels are supported")
        if not (0 < self.cr_threshold <= 1):
            raise UsageError("cr_threshold must be in (0, 1]")
        if self.aggregation not in ("geometric", "arithmetic"):
            raise UsageError(f"unknown aggregation {self.aggregation!r}")
        if self.parallelism < 1:
            raise UsageError("parallelism must be >= 1")
        if self.max_repairs < 0:
            raise UsageError("max_repairs must be >= 0")
        if self.matrix_batch_size < 1:
            raise UsageError("matrix_batch_size must be >= 1")
        if not (0 < self.rotation_threshold <= 1):
            raise UsageError("rotation_threshold must be in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


_PIPELINE_KEYS = {
    "goal": str,
    "expert_count": int,
    "levels": int,
    "top_criteria_count": int,
    "sub_per_criterion": int,
    "alternatives_per_expert": int,
    "final_alternative_count": int,
    "aggregation": str,
    "cr_threshold": float,
    "strict_consistency": bool,
    "parallelism": int,
    "max_repairs": int,
    "matrix_batch_size": int,
    "max_label_words": int,
    "run_advise": bool,
    "personas_file": "path",
}

_BACKEND_KEYS = {
    "kind": str,
    "script": "path",
    "transcript": "path",
    "endpoint": str,
    "model": str,
    "api_key_env": str,
    "timeout": float,
    "max_retries": int,
    "backoff": float,
}

_PRICING_KEYS = {"input_per_1k": str, "output_per_1k": str, "blended_per_1k": str}

_LIMITS_KEYS = {
    "context_budget": int,
    "rotation_threshold": float,
    "tokens_per_word": float,
}

_SECTIONS = {
    "pipeline": _PIPELINE_KEYS,
    "backend": _BACKEND_KEYS,
    "pricing": _PRICING_KEYS,
    "limits": _LIMITS_KEYS,
}


def _convert(section: str, key: str, raw: str, kind, base: Path | None):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "path":
            return resolve_path(raw.strip(), base)
        return kind(raw.strip())
    except ValueError as exc:
        raise UsageError(f"[{section}] {key}: {exc}") from exc


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read a config file; ``overrides`` (e.g. CLI flags) win over the file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise UsageError(f"config {path} is malformed: {exc}") from exc

    base = Path(path).resolve().parent
    values: dict = {}
    backend_settings: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise UsageError(f"config {path}: unknown section [{section}]")
        known = _SECTIONS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise UsageError(f"config {path}: unknown key {key!r} in [{section}]")
            converted = _convert(section, key, raw, known[key], base)
            if section == "pipeline":
                values[key] = converted
            elif section == "backend":
                if key == "kind":
                    values["backend_kind"] = converted
                else:
                    backend_settings[key] = converted
            elif section == "pricing":
                values[f"pricing_{key}"] = converted
            else:
                values[key] = converted
    values["backend_settings"] = backend_settings
    if overrides:
        values.update(overrides)
    if "goal" not in values:
        raise UsageError(f"config {path}: [pipeline] goal is required")
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise UsageError(f"config {path}: {exc}") from exc
