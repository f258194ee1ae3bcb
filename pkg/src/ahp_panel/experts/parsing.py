"""Parsers turning free-form expert replies into structured artifacts.

Every parser raises :class:`ParseViolation` (repairable) when a reply does
not meet its contract, so the caller can send a reminder prompt and retry.
Prose around the structured payload (rationales, greetings) is ignored, and
abbreviated item names are matched by unique word subset, e.g. a table
header "Training Effectiveness" resolves to "Training Program Effectiveness".
"""

from __future__ import annotations

import math
import re

from ..elicitation import ScoreBallot, normalize_label
from ..errors import ParseViolation
from ..matrices import PairwiseMatrix

# The admissible judgment values: 1..9 and their reciprocals.
SAATY_SCALE = tuple(1.0 / k for k in range(9, 1, -1)) + tuple(float(k) for k in range(1, 10))
SAATY_SNAP_TOL = 1e-6

_BULLET_LINE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|[-*•]\s+)(?P<item>.+?)\s*$")
_SCORE_LINE = re.compile(
    r"^\s*(?:[-*•]\s*)?(?:\d+\s*[.)]\s*)?(?P<label>.+?)\s*[:\-–—]\s*"
    r"(?P<score>[-+]?\d+(?:\.\d+)?)\s*$")
_MATRIX_HEADER = re.compile(r"^\s*(?:#+\s*|\*\*)?Matrix\s*[:\-]\s*(?P<name>.+?)(?:\*\*)?\s*$", re.I)
_TRIPLE_LINE = re.compile(
    r"^\s*(?:[-*•]\s*)?(?P<a>.+?)\s+vs\.?\s+(?P<b>.+?)\s*[:=]\s*(?P<value>\S+)\s*$", re.I)

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}


def _clean_item(text: str) -> str:
    text = text.strip().strip("*_").strip()
    return text.rstrip(".,;").strip()


def parse_saaty_value(token: str) -> float:
    """Parse one judgment token into an exact scale value.

    Accepts integers 1..9, fractions 1/2..1/9, and decimal renderings within
    1e-6 of a scale point (e.g. "0.5", "0.111111"). Anything else is an
    out-of-scale or unparseable violation.
    """
    token = str(token).strip()
    m = re.fullmatch(r"(\d+)\s*/\s*(\d+)", token)
    if m:
        p, q = int(m.group(1)), int(m.group(2))
        if q == 0:
            raise ParseViolation("unparseable value", f"zero denominator in {token!r}")
        value = p / q
    else:
        try:
            value = float(token)
        except ValueError:
            raise ParseViolation("unparseable value", f"cannot read {token!r} as a judgment")
    for point in SAATY_SCALE:
        if abs(value - point) <= SAATY_SNAP_TOL:
            return point
    raise ParseViolation(
        "out-of-scale value",
        f"{token!r} is not on the 1/9..9 judgment scale")


def _match_label(raw: str, expected: list) -> str | None:
    """Resolve a possibly abbreviated name to one of the expected labels.

    Exact canonical match wins; otherwise a unique word-subset match is
    accepted (every word of the candidate appears in exactly one expected
    label). Returns the expected label, or None.
    """
    raw_canon = normalize_label(raw) if raw.strip() else ""
    if not raw_canon:
        return None
    by_canon = {normalize_label(e): e for e in expected}
    if raw_canon in by_canon:
        return by_canon[raw_canon]
    words = set(raw_canon.split())
    hits = [e for e in expected if words <= set(normalize_label(e).split())]
    if len(hits) == 1:
        return hits[0]
    return None


def parse_item_list(reply: str, expected_n: int, max_words: int) -> list:
    """Extract exactly ``expected_n`` labels from a list-shaped reply.

    Accepts numbered lines, bulleted lines, a comma-separated line, or bare
    lines. Labels longer than ``max_words`` words and wrong counts are
    repairable violations.
    """
    lines = reply.splitlines()
    items = [_clean_item(m.group("item")) for m in map(_BULLET_LINE.match, lines) if m]
    if not items:
        for line in lines:
            if line.count(",") >= 1:
                parts = [_clean_item(p) for p in line.split(",") if _clean_item(p)]
                if len(parts) == expected_n:
                    items = parts
                    break
    if not items:
        bare = [_clean_item(l) for l in lines if _clean_item(l)]
        if len(bare) == expected_n:
            items = bare
    items = [i for i in items if i]
    if len(items) != expected_n:
        raise ParseViolation(
            "count mismatch", f"expected {expected_n} items, found {len(items)}")
    for item in items:
        if len(item.split()) > max_words:
            raise ParseViolation(
                "label too long",
                f"label {item!r} has more than {max_words} words")
    return items


def parse_grouped_items(reply: str, groups: list, per_group_n: int, max_words: int) -> dict:
    """Parse "Group: item; item; item" lines, one line per expected group."""
    found = {}
    for line in reply.splitlines():
        if ":" not in line:
            continue
        head, _, tail = line.partition(":")
        group = _match_label(_clean_item(head), list(groups))
        if group is None:
            continue
        if group in found:
            raise ParseViolation("duplicate group", f"group {group!r} listed twice")
        items = [_clean_item(p) for p in tail.split(";") if _clean_item(p)]
        found[group] = items
    missing = [g for g in groups if g not in found]
    if missing:
        raise ParseViolation(
            "count mismatch", f"no proposals found for: {', '.join(missing)}")
    for group, items in found.items():
        if len(items) != per_group_n:
            raise ParseViolation(
                "count mismatch",
                f"group {group!r}: expected {per_group_n} items, found {len(items)}")
        for item in items:
            if len(item.split()) > max_words:
                raise ParseViolation(
                    "label too long",
                    f"label {item!r} has more than {max_words} words")
    return {g: found[g] for g in groups}


def parse_ballot(reply: str, items: list, expert_id: str) -> ScoreBallot:
    """Parse "Item: score" lines into a complete 1..9 ballot over ``items``."""
    scores = {}
    for line in reply.splitlines():
        m = _SCORE_LINE.match(line)
        if not m:
            continue
        label = _match_label(_clean_item(m.group("label")), list(items))
        if label is None:
            continue  # prose line that happens to end in a number
        key = normalize_label(label)
        if key in scores:
            raise ParseViolation("duplicate item", f"{label!r} scored more than once")
        raw = float(m.group("score"))
        if raw != int(raw):
            raise ParseViolation("non-integer score", f"{label!r} scored {m.group('score')}")
        score = int(raw)
        if not (1 <= score <= 9):
            raise ParseViolation(
                "score out of range", f"{label!r} scored {score}, outside 1..9")
        scores[key] = score
    missing = [i for i in items if normalize_label(i) not in scores]
    if missing:
        raise ParseViolation(
            "missing item",
            f"no score for: {', '.join(missing[:5])}"
            + (f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""))
    return ScoreBallot(expert_id=expert_id, scores=scores)


def split_matrix_sections(reply: str, expected_names: list) -> dict:
    """Split a multi-matrix reply on "Matrix: <name>" lines.

    Returns {expected name: section text}; every expected name must appear
    exactly once.
    """
    sections = []
    current_name = None
    current_lines = []
    for line in reply.splitlines():
        m = _MATRIX_HEADER.match(line)
        if m:
            if current_name is not None:
                sections.append((current_name, "\n".join(current_lines)))
            current_name = m.group("name")
            current_lines = []
        elif current_name is not None:
            current_lines.append(line)
    if current_name is not None:
        sections.append((current_name, "\n".join(current_lines)))

    out = {}
    for raw_name, text in sections:
        name = _match_label(_clean_item(raw_name), list(expected_names))
        if name is None:
            raise ParseViolation(
                "label mismatch", f"matrix section {raw_name!r} matches no expected item")
        if name in out:
            raise ParseViolation("duplicate item", f"two matrix sections for {name!r}")
        out[name] = text
    missing = [n for n in expected_names if n not in out]
    if missing:
        raise ParseViolation(
            "count mismatch", f"no matrix section for: {', '.join(missing)}")
    return out


def parse_matrix(reply: str, labels: list) -> PairwiseMatrix:
    """Parse one comparison matrix out of a reply.

    Understands a table (pipe-separated, item names in header row and first
    column) or a pair list ("A vs B: 3"). Missing lower-triangle cells are
    derived by reciprocity; the result is rebuilt from its upper triangle so
    it is exactly reciprocal and passes validation with zero tolerance.
    """
    labels = list(labels)
    n = len(labels)
    cells = _parse_table_cells(reply, labels)
    if cells is None:
        cells = _parse_triple_cells(reply, labels)
    if cells is None:
        raise ParseViolation(
            "unrecognized matrix", "reply contains neither a table nor pair judgments")

    values = [[math.nan] * n for _ in range(n)]
    for (i, j), token in cells.items():
        try:
            values[i][j] = parse_saaty_value(token)
        except ParseViolation:
            try:
                values[i][j] = float(str(token).strip())
            except ValueError:
                raise ParseViolation(
                    "unparseable value",
                    f"cannot read cell ({labels[i]!r}, {labels[j]!r}): {token!r}")

    for i in range(n):
        if not math.isnan(values[i][i]) and abs(values[i][i] - 1.0) > SAATY_SNAP_TOL:
            raise ParseViolation(
                "diagonal", f"diagonal entry for {labels[i]!r} is {values[i][i]}, must be 1")

    upper = []
    for i in range(n):
        for j in range(i + 1, n):
            up, lo = values[i][j], values[j][i]
            if math.isnan(up) and math.isnan(lo):
                raise ParseViolation(
                    "missing cell",
                    f"no judgment for ({labels[i]!r}, {labels[j]!r}) in either direction")
            if math.isnan(up):
                up = 1.0 / lo
            elif not math.isnan(lo):
                if min(abs(lo - 1.0 / up), abs(up - 1.0 / lo)) > SAATY_SNAP_TOL:
                    raise ParseViolation(
                        "reciprocity",
                        f"entries for ({labels[i]!r}, {labels[j]!r}) are not reciprocal: "
                        f"{up:g} vs {lo:g}")
            snapped = None
            for point in SAATY_SCALE:
                if abs(up - point) <= SAATY_SNAP_TOL:
                    snapped = point
                    break
            if snapped is None:
                raise ParseViolation(
                    "out-of-scale entry",
                    f"judgment {up:g} for ({labels[i]!r}, {labels[j]!r}) "
                    "is not on the 1/9..9 scale")
            upper.append(snapped)
    return PairwiseMatrix.from_upper(labels, upper)


def _parse_table_cells(reply: str, labels: list) -> dict | None:
    rows = []
    for line in reply.splitlines():
        if "|" not in line:
            continue
        parts = [c.strip() for c in line.strip().strip("|").split("|")]
        if all(re.fullmatch(r":?-{2,}:?", p or "---") for p in parts):
            continue  # markdown separator row
        rows.append(parts)
    if len(rows) < 2:
        return None

    header = rows[0][1:]
    col_map = {}
    if len(header) == len(labels):
        mapped = [_match_label(h, labels) for h in header]
        if all(mapped) and len(set(mapped)) == len(labels):
            col_map = {k: labels.index(m) for k, m in enumerate(mapped)}
        else:
            col_map = {k: k for k in range(len(labels))}  # positional fallback
    else:
        raise ParseViolation(
            "label mismatch",
            f"table header has {len(header)} columns, expected {len(labels)}")

    cells = {}
    seen_rows = set()
    for parts in rows[1:]:
        row_label = _match_label(parts[0], labels)
        if row_label is None:
            raise ParseViolation(
                "label mismatch", f"table row {parts[0]!r} matches no expected item")
        i = labels.index(row_label)
        if i in seen_rows:
            raise ParseViolation("duplicate item", f"two table rows for {row_label!r}")
        seen_rows.add(i)
        for k, token in enumerate(parts[1:]):
            if k not in col_map:
                continue
            token = token.strip()
            if token in ("", "-", "–"):
                continue
            cells[(i, col_map[k])] = token
    if len(seen_rows) != len(labels):
        missing = [l for l in labels if labels.index(l) not in seen_rows]
        raise ParseViolation("missing cell", f"no table row for: {', '.join(missing)}")
    return cells


def _parse_triple_cells(reply: str, labels: list) -> dict | None:
    cells = {}
    for line in reply.splitlines():
        m = _TRIPLE_LINE.match(line)
        if not m:
            continue
        a = _match_label(_clean_item(m.group("a")), labels)
        b = _match_label(_clean_item(m.group("b")), labels)
        if a is None or b is None:
            continue
        cells[(labels.index(a), labels.index(b))] = m.group("value")
    return cells or None


def parse_expert_count_advice(reply: str) -> tuple | None:
    """Extract a suggested expert-count range like "5-7 experts"."""
    m = re.search(r"(\d+)\s*(?:-|–|to)\s*(\d+)\s+experts", reply)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return (min(lo, hi), max(lo, hi))
    m = re.search(r"(\d+)\s+experts", reply)
    if m:
        n = int(m.group(1))
        return (n, n)
    return None


def parse_levels_advice(reply: str) -> int | None:
    """Extract a suggested criteria-tree depth like "a two-level structure"."""
    m = re.search(r"\b(\d+|%s)[\s-]*level" % "|".join(_NUMBER_WORDS), reply, re.I)
    if not m:
        return None
    token = m.group(1).lower()
    return int(token) if token.isdigit() else _NUMBER_WORDS[token]
