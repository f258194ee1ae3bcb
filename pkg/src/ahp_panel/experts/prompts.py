"""Prompt templates with strict {placeholder} substitution.

Templates live as plain-text files, one per pipeline stage, under the
package ``templates/`` directory; callers may point at an alternative
directory to override them.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import DataError

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> set:
        return set(_PLACEHOLDER.findall(self.body))


def render_prompt(template: PromptTemplate, bindings: dict) -> str:
    """Substitute every placeholder; unbound or unknown names are errors."""
    needed = template.placeholders
    given = set(bindings)
    missing = needed - given
    if missing:
        raise DataError(
            f"template {template.name!r}: unbound placeholder(s) {sorted(missing)}")
    unknown = given - needed
    if unknown:
        raise DataError(
            f"template {template.name!r}: unknown placeholder(s) in bindings {sorted(unknown)}")
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.body)


def _template_dir():
    return resources.files("ahp_panel") / "templates"


def load_templates(directory=None) -> dict:
    """Load every ``*.txt`` template, keyed by file stem."""
    out = {}
    if directory is not None:
        for path in sorted(Path(directory).glob("*.txt")):
            out[path.stem] = PromptTemplate(path.stem, path.read_text(encoding="utf-8").rstrip("\n"))
        return out
    for entry in sorted(_template_dir().iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".txt"):
            stem = entry.name[:-4]
            out[stem] = PromptTemplate(stem, entry.read_text(encoding="utf-8").rstrip("\n"))
    if not out:
        raise DataError("no prompt templates found")
    return out


def template_versions(templates: dict) -> dict:
    """Short content hash per template, recorded as report provenance."""
    return {
        name: hashlib.sha256(t.body.encode("utf-8")).hexdigest()[:12]
        for name, t in sorted(templates.items())
    }
