"""Decision hierarchy: goal, two criteria levels, alternatives.

Holds local/global priorities on the tree, synthesizes final alternative
scores from per-leaf alternative priorities, and serializes the tree as
JSON, an indented text outline, or DOT graph text.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DataError
from .matrices import PriorityVector, Violation, ValidationResult

PRIORITY_SUM_TOL = 1e-9
GLOBAL_SUM_TOL = 1e-6


@dataclass(frozen=True)
class CriterionNode:
    label: str
    level: int  # 1 = top-level, 2 = sub-criterion
    parent: str | None = None
    local_priority: float | None = None
    global_priority: float | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "level": self.level,
            "parent": self.parent,
            "local_priority": self.local_priority,
            "global_priority": self.global_priority,
        }


@dataclass(frozen=True)
class HierarchyTree:
    goal: str
    criteria: tuple = ()
    alternatives: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "criteria", tuple(self.criteria))
        object.__setattr__(self, "alternatives", tuple(self.alternatives))

    @classmethod
    def build(cls, goal: str, tops, subs_by_parent=None, alternatives=()) -> "HierarchyTree":
        """Assemble a tree from a top-level list and a parent -> subs mapping."""
        subs_by_parent = subs_by_parent or {}
        nodes = []
        for top in tops:
            nodes.append(CriterionNode(label=top, level=1))
            for sub in subs_by_parent.get(top, ()):
                nodes.append(CriterionNode(label=sub, level=2, parent=top))
        unknown = set(subs_by_parent) - set(tops)
        if unknown:
            raise DataError(f"sub-criteria listed under unknown parents: {sorted(unknown)}")
        return cls(goal=goal, criteria=nodes, alternatives=tuple(alternatives))

    def top_nodes(self) -> list:
        return [c for c in self.criteria if c.level == 1]

    def children(self, parent_label: str) -> list:
        return [c for c in self.criteria if c.level == 2 and c.parent == parent_label]

    def leaves(self) -> list:
        """Leaf criteria: every level-2 node, plus childless level-1 nodes."""
        have_children = {c.parent for c in self.criteria if c.level == 2}
        out = []
        for c in self.criteria:
            if c.level == 2 or c.label not in have_children:
                out.append(c)
        return out

    def node(self, label: str) -> CriterionNode:
        for c in self.criteria:
            if c.label == label:
                return c
        raise DataError(f"no criterion named {label!r}")

    def with_local_priorities(self, group_priorities: dict) -> "HierarchyTree":
        """Attach local priorities; keys are None (top group) or parent labels."""
        new = []
        for c in self.criteria:
            key = None if c.level == 1 else c.parent
            vec = group_priorities.get(key)
            if vec is None:
                new.append(c)
                continue
            mapping = vec.as_dict() if isinstance(vec, PriorityVector) else dict(vec)
            if c.label in mapping:
                new.append(replace(c, local_priority=float(mapping[c.label])))
            else:
                new.append(c)
        return replace(self, criteria=tuple(new))

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "criteria": [c.to_dict() for c in self.criteria],
            "alternatives": list(self.alternatives),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HierarchyTree":
        return cls(
            goal=d["goal"],
            criteria=tuple(
                CriterionNode(
                    label=c["label"],
                    level=int(c["level"]),
                    parent=c.get("parent"),
                    local_priority=c.get("local_priority"),
                    global_priority=c.get("global_priority"),
                )
                for c in d["criteria"]
            ),
            alternatives=tuple(d.get("alternatives", ())),
        )


@dataclass(frozen=True)
class AlternativeScores:
    """Final synthesized scores and the descending ranking."""

    scores: dict
    ranking: tuple = field(default=())

    @property
    def best(self) -> str:
        return self.ranking[0]

    def to_dict(self) -> dict:
        return {"scores": dict(self.scores), "ranking": list(self.ranking)}


def validate_tree(tree: HierarchyTree, expected_shape: dict | None = None) -> ValidationResult:
    """Structural check: parentage, sibling-label uniqueness, optional shape.

    ``expected_shape`` may carry ``top_count``, ``sub_per_top`` and
    ``alt_count``; any present key is enforced.
    """
    violations = []
    top_labels = [c.label for c in tree.criteria if c.level == 1]
    top_set = set(top_labels)
    for c in tree.criteria:
        if c.level == 1 and c.parent is not None:
            violations.append(Violation(
                "orphan node", None, f"top-level node {c.label!r} declares parent {c.parent!r}"))
        elif c.level == 2:
            if c.parent is None or c.parent not in top_set:
                violations.append(Violation(
                    "orphan node", None,
                    f"sub-criterion {c.label!r} has missing parent {c.parent!r}"))
        elif c.level != 1:
            violations.append(Violation(
                "unsupported depth", None,
                f"node {c.label!r} at level {c.level}; only 2 criteria levels are supported"))

    groups = {None: top_labels}
    for c in tree.criteria:
        if c.level == 2:
            groups.setdefault(c.parent, []).append(c.label)
    groups["alternatives"] = list(tree.alternatives)
    for group, labels in groups.items():
        seen = set()
        for lab in labels:
            if lab in seen:
                where = "top level" if group is None else f"group {group!r}"
                violations.append(Violation(
                    "duplicate label", None, f"duplicate label {lab!r} in {where}"))
            seen.add(lab)

    if expected_shape:
        checks = [
            ("top_count", len(top_labels), "top-level criteria"),
            ("alt_count", len(tree.alternatives), "alternatives"),
        ]
        for key, actual, noun in checks:
            want = expected_shape.get(key)
            if want is not None and actual != want:
                violations.append(Violation(
                    "shape mismatch", None, f"expected {want} {noun}, found {actual}"))
        sub_per_top = expected_shape.get("sub_per_top")
        if sub_per_top is not None:
            for top in top_labels:
                count = len(tree.children(top))
                if count != sub_per_top:
                    violations.append(Violation(
                        "shape mismatch", None,
                        f"criterion {top!r} has {count} sub-criteria, expected {sub_per_top}"))
    return ValidationResult(tuple(violations))


def global_leaf_priorities(tree: HierarchyTree) -> HierarchyTree:
    """Compute leaf global priorities: parent local x own local, renormalized.

    Depth-1 leaves keep their local priority. The products are renormalized
    to sum exactly 1 so the downstream synthesis is a convex combination.
    """
    for c in tree.criteria:
        if c.local_priority is None:
            raise DataError(f"criterion {c.label!r} has no local priority")
    for key, labels in _sibling_groups(tree).items():
        total = sum(tree.node(lab).local_priority for lab in labels)
        if abs(total - 1.0) > 1e-6:
            group = "top level" if key is None else f"group {key!r}"
            raise DataError(f"local priorities in {group} sum to {total}, expected 1")

    tops = {c.label: c.local_priority for c in tree.criteria if c.level == 1}
    leaves = tree.leaves()
    products = {}
    for leaf in leaves:
        if leaf.level == 1:
            products[leaf.label] = leaf.local_priority
        else:
            products[leaf.label] = tops[leaf.parent] * leaf.local_priority
    total = sum(products.values())
    leaf_set = set(leaves)
    new = tuple(
        replace(c, global_priority=products[c.label] / total) if c in leaf_set else c
        for c in tree.criteria
    )
    return replace(tree, criteria=new)


def _sibling_groups(tree: HierarchyTree) -> dict:
    groups = {None: [c.label for c in tree.criteria if c.level == 1]}
    for c in tree.criteria:
        if c.level == 2:
            groups.setdefault(c.parent, []).append(c.label)
    return groups


def score_alternatives(leaf_globals: dict, alt_locals: dict) -> AlternativeScores:
    """Synthesize final alternative scores over all leaf criteria.

    ``leaf_globals`` maps leaf label -> global priority; ``alt_locals`` maps
    leaf label -> alternative priorities (PriorityVector or mapping) under
    that leaf. Every leaf must carry the same alternative label set. The
    score of an alternative is the global-priority-weighted sum of its local
    priorities; no renormalization is applied.
    """
    if set(leaf_globals) != set(alt_locals):
        missing = set(leaf_globals) ^ set(alt_locals)
        raise DataError(f"leaf sets differ between globals and local vectors: {sorted(missing)}")
    if not leaf_globals:
        raise DataError("no leaf criteria to synthesize over")

    normalized = {}
    alt_labels = None
    for leaf, vec in alt_locals.items():
        mapping = vec.as_dict() if isinstance(vec, PriorityVector) else dict(vec)
        labels = tuple(sorted(mapping))
        if alt_labels is None:
            alt_labels = labels
            order = list(vec.labels) if isinstance(vec, PriorityVector) else sorted(mapping)
        elif labels != alt_labels:
            raise DataError(
                f"alternative labels under leaf {leaf!r} differ from the rest: "
                f"{list(labels)} vs {list(alt_labels)}")
        normalized[leaf] = mapping

    scores = {
        alt: sum(leaf_globals[leaf] * normalized[leaf][alt] for leaf in leaf_globals)
        for alt in order
    }
    ranking = tuple(sorted(scores, key=lambda a: (-scores[a], a)))
    return AlternativeScores(scores=scores, ranking=ranking)


def export_tree(tree: HierarchyTree, format: str = "text-outline") -> str:
    """Deterministic text serialization of a validated tree.

    ``text-outline`` is an indented listing; ``graph-description`` is a DOT
    digraph of goal -> criterion -> sub-criterion -> alternative edges.
    """
    if format == "text-outline":
        return _export_outline(tree)
    if format == "graph-description":
        return _export_dot(tree)
    raise DataError(f"unknown export format {format!r}")


def _export_outline(tree: HierarchyTree) -> str:
    lines = [f"Goal: {tree.goal}"]
    for top in tree.top_nodes():
        lines.append(f"- {top.label}:")
        for sub in tree.children(top.label):
            lines.append(f"    {sub.label}")
    if tree.alternatives:
        lines.append("Alternatives:")
        for alt in tree.alternatives:
            lines.append(f"- {alt}")
    return "\n".join(lines) + "\n"


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _export_dot(tree: HierarchyTree) -> str:
    goal = f"goal: {tree.goal}"
    lines = ["digraph hierarchy {"]
    for top in tree.top_nodes():
        lines.append(f"    {_dot_quote(goal)} -> {_dot_quote(top.label)};")
    for top in tree.top_nodes():
        for sub in tree.children(top.label):
            lines.append(f"    {_dot_quote(top.label)} -> {_dot_quote(sub.label)};")
    for leaf in tree.leaves():
        for alt in tree.alternatives:
            lines.append(f"    {_dot_quote(leaf.label)} -> {_dot_quote('alt: ' + alt)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
