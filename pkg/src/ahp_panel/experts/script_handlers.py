"""Standard handlers for data-driven scripted backends.

A scripted panel is a rule table plus a ``data`` block holding each
persona's proposals, ballot scores, and judgment matrices. These handlers
look up the persona's entry, honor the item order embedded in the prompt,
and render replies in the shapes the parsers accept. Everything is a pure
function of (data, persona, prompt), so scripted runs are bit-reproducible.
"""

from __future__ import annotations

import re

from ..elicitation import normalize_label
from ..errors import BackendError

_NUMBERED_ITEM = re.compile(r"^\s*\d+\.\s+(?P<item>.+?)\s*$", re.M)
_OUTLINE_PARENT = re.compile(r"^-\s+(?P<parent>.+?):\s*$", re.M)
_SUB_BALLOT_PARENT = re.compile(r'sub-criteria for the criterion "(?P<parent>[^"]+)"')
_ALT_BATCH = re.compile(r"Sub-criteria are: (?P<leaves>.+?)\.$", re.M)


def _persona_data(data, section, persona):
    block = data.get(section, {}).get(persona.id)
    if block is None:
        raise BackendError(f"panel script has no {section!r} entry for {persona.id!r}")
    return block


def _numbered(items) -> str:
    return "\n".join(f"{k}. {item}" for k, item in enumerate(items, start=1))


def _with_rationale(data, persona, key: str, body: str) -> str:
    note = data.get("rationales", {}).get(persona.id, {}).get(key)
    return f"{body}\n\n{note}" if note else body


def render_matrix_table(labels, rows) -> str:
    head = "| Item | " + " | ".join(labels) + " |"
    sep = "|" + "---|" * (len(labels) + 1)
    body = [
        "| " + label + " | " + " | ".join(str(c) for c in row) + " |"
        for label, row in zip(labels, rows)
    ]
    return "\n".join([head, sep] + body)


def propose_criteria(data, persona, conversation, prompt, match):
    items = _persona_data(data, "criteria_proposals", persona)
    return _with_rationale(data, persona, "criteria", _numbered(items))


def propose_subcriteria(data, persona, conversation, prompt, match):
    proposals = _persona_data(data, "subcriteria_proposals", persona)
    lines = [f"{parent}: " + "; ".join(subs) for parent, subs in proposals.items()]
    return _with_rationale(data, persona, "subcriteria", "\n".join(lines))


def propose_alternatives(data, persona, conversation, prompt, match):
    items = _persona_data(data, "alternative_proposals", persona)
    return _with_rationale(data, persona, "alternatives", "\n".join(items))


def _ballot_reply(scores, prompt, persona, data, key):
    items = _NUMBERED_ITEM.findall(prompt)
    if not items:
        raise BackendError("ballot prompt lists no numbered items")
    lines = []
    for item in items:
        canon = normalize_label(item)
        if canon not in scores:
            raise BackendError(
                f"panel script has no score for {item!r} from {persona.id!r}")
        lines.append(f"{item}: {scores[canon]}")
    return _with_rationale(data, persona, key, "\n".join(lines))


def ballot_criteria(data, persona, conversation, prompt, match):
    scores = _persona_data(data, "criteria_scores", persona)
    return _ballot_reply(scores, prompt, persona, data, "ballot_criteria")


def ballot_subcriteria(data, persona, conversation, prompt, match):
    m = _SUB_BALLOT_PARENT.search(prompt)
    if not m:
        raise BackendError("sub-criteria ballot prompt names no parent")
    parent = m.group("parent")
    by_parent = _persona_data(data, "subcriteria_scores", persona)
    if parent not in by_parent:
        raise BackendError(
            f"panel script has no sub-criteria scores for {parent!r} from {persona.id!r}")
    return _ballot_reply(by_parent[parent], prompt, persona, data, f"ballot_sub:{parent}")


def ballot_alternatives(data, persona, conversation, prompt, match):
    scores = _persona_data(data, "alternative_scores", persona)
    return _ballot_reply(scores, prompt, persona, data, "ballot_alternatives")


def matrix_top(data, persona, conversation, prompt, match):
    m = _persona_data(data, "matrices", persona).get("top")
    if m is None:
        raise BackendError(f"panel script has no top-level matrix for {persona.id!r}")
    table = render_matrix_table(m["labels"], m["rows"])
    return _with_rationale(data, persona, "top", table)


def _sectioned_matrices(data, persona, names, kind, rationale_key):
    matrices = _persona_data(data, "matrices", persona)
    sections = []
    for name in names:
        m = matrices.get(f"{kind}:{name}")
        if m is None:
            raise BackendError(
                f"panel script has no {kind!r} matrix for {name!r} from {persona.id!r}")
        sections.append(f"Matrix: {name}\n" + render_matrix_table(m["labels"], m["rows"]))
    return _with_rationale(data, persona, rationale_key, "\n\n".join(sections))


def matrix_sub(data, persona, conversation, prompt, match):
    # scope to the outline below the marker so carryover recap lines are not
    # mistaken for tree parents
    marker = prompt.find("looks like this:")
    outline = prompt[marker:] if marker >= 0 else prompt
    parents = _OUTLINE_PARENT.findall(outline)
    if not parents:
        raise BackendError("sub-criteria matrix prompt lists no criteria outline")
    return _sectioned_matrices(data, persona, parents, "sub", f"sub:{parents[0]}")


def matrix_alt(data, persona, conversation, prompt, match):
    m = _ALT_BATCH.search(prompt)
    if not m:
        raise BackendError("alternatives matrix prompt lists no sub-criteria batch")
    leaves = [x.strip() for x in m.group("leaves").split(", ")]
    return _sectioned_matrices(data, persona, leaves, "alt", f"alt:{leaves[0]}")


DEFAULT_HANDLERS = {
    "propose_criteria": propose_criteria,
    "propose_subcriteria": propose_subcriteria,
    "propose_alternatives": propose_alternatives,
    "ballot_criteria": ballot_criteria,
    "ballot_subcriteria": ballot_subcriteria,
    "ballot_alternatives": ballot_alternatives,
    "matrix_top": matrix_top,
    "matrix_sub": matrix_sub,
    "matrix_alt": matrix_alt,
}
