"""Expert personas: the named judges on the panel and the coordinating guide."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError, ParseViolation

ROLE_GUIDE = "guide"
ROLE_EXPERT = "expert"


@dataclass(frozen=True)
class ExpertPersona:
    id: str
    name: str
    description: str
    instructions: str
    role: str = ROLE_EXPERT

    def __post_init__(self):
        if not self.instructions.strip():
            raise DataError(f"persona {self.id!r} has empty instructions")
        if self.role not in (ROLE_GUIDE, ROLE_EXPERT):
            raise DataError(f"persona {self.id!r} has unknown role {self.role!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "instructions": self.instructions,
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertPersona":
        return cls(
            id=d["id"],
            name=d["name"],
            description=d.get("description", ""),
            instructions=d["instructions"],
            role=d.get("role", ROLE_EXPERT),
        )


def persona_id_for(name: str) -> str:
    """Stable slug for a display name: 'Dr. Ava Chen' -> 'ava-chen'."""
    cleaned = re.sub(r"\b(dr|prof|lt|col|retd|mr|ms|mrs)\.?\b", "", name, flags=re.I)
    cleaned = re.sub(r"[^a-z0-9]+", "-", cleaned.casefold()).strip("-")
    if not cleaned:
        raise DataError(f"cannot derive an id from persona name {name!r}")
    return cleaned


def load_personas(path) -> list:
    """Load a persona roster from a JSON file (list of persona objects)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read persona file {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"persona file {path} must hold a JSON array")
    personas = [ExpertPersona.from_dict(d) for d in raw]
    ids = [p.id for p in personas]
    if len(set(ids)) != len(ids):
        raise DataError(f"persona file {path} has duplicate ids")
    return personas


_BLOCK_HEADER = re.compile(r"^(?P<title>[^:\n]{3,100}),\s*(?P<name>[^:\n]{2,60}):\s*$")
_FIELD = re.compile(r"^(Background|Personality(?:/Preferences)?)\s*:\s*(?P<text>.*)$", re.I)


def parse_personas_reply(reply: str, expected_n: int) -> list:
    """Parse a guide reply describing expert personas into `ExpertPersona`s.

    The expected shape is one block per persona:

        <Professional title>, <Name>:
        Background: ...
        Personality/Preferences: ...

    Instructions are composed from the parsed background and personality so
    the persona can prime a fresh conversation.
    """
    blocks = []
    current = None
    current_field = None
    for line in reply.splitlines():
        stripped = line.strip()
        if not stripped:
            current_field = None
            continue
        header = _BLOCK_HEADER.match(stripped)
        if header:
            current = {
                "title": header.group("title").strip(),
                "name": header.group("name").strip(),
                "background": "",
                "personality": "",
            }
            blocks.append(current)
            current_field = None
            continue
        if current is None:
            continue
        fielded = _FIELD.match(stripped)
        if fielded:
            current_field = "background" if fielded.group(1).lower().startswith("back") else "personality"
            current[current_field] = fielded.group("text").strip()
        elif current_field:
            current[current_field] = (current[current_field] + " " + stripped).strip()

    if len(blocks) != expected_n:
        raise ParseViolation(
            "count mismatch",
            f"expected {expected_n} expert personas, parsed {len(blocks)}")
    personas = []
    for b in blocks:
        if not b["background"]:
            raise ParseViolation(
                "missing field", f"persona {b['name']!r} has no Background line")
        display = f"{b['title']}, {b['name']}"
        instructions = (
            f"You are {b['name']}, {b['title']}. {b['background']} "
            f"{b['personality']} "
            "You serve on a panel of independent experts: give your own "
            "professional judgment and follow the requested reply format exactly."
        ).strip()
        personas.append(ExpertPersona(
            id=persona_id_for(b["name"]),
            name=display,
            description=b["title"],
            instructions=instructions,
            role=ROLE_EXPERT,
        ))
    if len({p.id for p in personas}) != len(personas):
        raise ParseViolation("duplicate persona", "two personas map to the same id")
    return personas
