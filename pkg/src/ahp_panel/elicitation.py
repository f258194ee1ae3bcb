"""Candidate pooling, deduplication, score voting, and top-n selection.

The same propose -> dedupe -> vote -> select funnel is used for top-level
criteria, per-parent sub-criteria, and alternatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DataError

SCORE_MIN = 1
SCORE_MAX = 9

_WS = re.compile(r"\s+")


def normalize_label(raw: str) -> str:
    """Canonical form for duplicate detection: trimmed, collapsed, casefolded.

    No stemming or fuzzy matching: "Communication Protocols" and
    "Communication Protocol" stay distinct.
    """
    canonical = _WS.sub(" ", str(raw).strip()).casefold()
    if not canonical:
        raise DataError("empty label")
    return canonical


@dataclass(frozen=True)
class Candidate:
    label: str        # display form as proposed
    proposer: str     # expert id

    @property
    def canonical(self) -> str:
        return normalize_label(self.label)


@dataclass(frozen=True)
class CandidatePool:
    """Ordered proposals for one elicitation stage."""

    stage: str  # "criteria", "sub-criteria:<parent>", or "alternatives"
    items: tuple = ()
    removed: tuple = ()  # dedupe log: candidates dropped as repeats

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "removed", tuple(self.removed))
        for item in self.items:
            normalize_label(item.label)  # raises on empty

    def labels(self) -> list:
        return [c.label for c in self.items]

    def canonicals(self) -> list:
        return [c.canonical for c in self.items]

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "items": [{"label": c.label, "proposer": c.proposer} for c in self.items],
            "removed": [{"label": c.label, "proposer": c.proposer} for c in self.removed],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidatePool":
        return cls(
            stage=d["stage"],
            items=tuple(Candidate(x["label"], x["proposer"]) for x in d["items"]),
            removed=tuple(Candidate(x["label"], x["proposer"]) for x in d.get("removed", [])),
        )


@dataclass(frozen=True)
class ScoreBallot:
    """One expert's 1..9 importance scores, keyed by canonical label."""

    expert_id: str
    scores: dict

    def __post_init__(self):
        object.__setattr__(
            self, "scores", {normalize_label(k): v for k, v in self.scores.items()}
        )


@dataclass(frozen=True)
class TallyResult:
    totals: dict            # canonical label -> summed score
    display: dict           # canonical label -> first-seen display form
    selected: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "totals": {self.display[k]: v for k, v in self.totals.items()},
            "selected": list(self.selected),
        }


def dedupe(pool: CandidatePool) -> CandidatePool:
    """Drop repeat labels (canonical match), keeping the first occurrence."""
    if not pool.items:
        raise DataError(f"pool for stage {pool.stage!r} is empty")
    seen = set()
    kept = []
    removed = list(pool.removed)
    for cand in pool.items:
        key = cand.canonical
        if key in seen:
            removed.append(cand)
        else:
            seen.add(key)
            kept.append(cand)
    return CandidatePool(stage=pool.stage, items=tuple(kept), removed=tuple(removed))


def tally(ballots, pool: CandidatePool) -> TallyResult:
    """Sum every expert's score per pooled item.

    Each ballot must score every pooled item exactly once with an integer
    in 1..9; extra or missing items are errors.
    """
    ballots = list(ballots)
    if not ballots:
        raise DataError("no ballots to tally")
    expected = set(pool.canonicals())
    if len(expected) != len(pool.items):
        raise DataError("pool has duplicate labels; dedupe before tallying")
    totals = {key: 0 for key in pool.canonicals()}
    for ballot in ballots:
        got = set(ballot.scores)
        missing = expected - got
        extra = got - expected
        if missing:
            raise DataError(
                f"ballot from {ballot.expert_id!r} missing items: {sorted(missing)[:5]}")
        if extra:
            raise DataError(
                f"ballot from {ballot.expert_id!r} has unknown items: {sorted(extra)[:5]}")
        for key, score in ballot.scores.items():
            if not isinstance(score, int) or isinstance(score, bool):
                raise DataError(
                    f"ballot from {ballot.expert_id!r}: score for {key!r} is not an integer")
            if not (SCORE_MIN <= score <= SCORE_MAX):
                raise DataError(
                    f"ballot from {ballot.expert_id!r}: score {score} for {key!r} "
                    f"outside {SCORE_MIN}..{SCORE_MAX}")
            totals[key] += score
    display = {c.canonical: c.label for c in reversed(pool.items)}
    return TallyResult(totals=totals, display=display)


def select_top_n(tally_result: TallyResult, n: int) -> list:
    """Pick the n items with the greatest totals (ties: ascending label).

    Returns display labels in rank order.
    """
    totals = tally_result.totals
    if n > len(totals):
        raise DataError(f"cannot select {n} items from {len(totals)}")
    if n < 1:
        raise DataError("selection count must be >= 1")
    ranked = sorted(totals, key=lambda k: (-totals[k], k))
    return [tally_result.display[k] for k in ranked[:n]]
