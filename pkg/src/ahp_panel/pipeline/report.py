"""Decision report assembly and rendering.

The report is derived purely from a completed session, so re-rendering is
idempotent and scripted/replay runs produce byte-identical output. The
markdown mirrors the presentation order of the results: top-level
priorities, global sub-criteria priorities, alternative scores, then the
consistency summary, counts, and cost accounting.
"""

from __future__ import annotations

import json

from ..errors import DataError
from .session import SessionState

REPORT_SCHEMA = "ahp-panel-report/1"


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _counts(session: SessionState) -> dict:
    art = session.artifacts
    crit_pool = art["criteria"]["pool"]
    alt_pool = art["alternatives"]["pool"]
    sub_candidates = 0
    sub_after_dedupe = 0
    for parent_block in art["subcriteria"]["per_parent"].values():
        pool = parent_block["pool"]
        sub_candidates += len(pool["items"]) + len(pool["removed"])
        sub_after_dedupe += len(pool["items"])
    expert_matrices = len(art["pairwise_top"]["matrices"])
    expert_matrices += sum(len(v) for v in art["pairwise_sub"]["matrices"].values())
    expert_matrices += sum(len(v) for v in art["pairwise_alt"]["matrices"].values())
    aggregates = 1 + len(art["aggregate"]["sub"]) + len(art["aggregate"]["alt"])
    return {
        "criteria_candidates": len(crit_pool["items"]) + len(crit_pool["removed"]),
        "criteria_after_dedupe": len(crit_pool["items"]),
        "subcriteria_candidates": sub_candidates,
        "subcriteria_after_dedupe": sub_after_dedupe,
        "leaf_criteria": len(art["subcriteria"]["leaves"]),
        "alternative_candidates": len(alt_pool["items"]) + len(alt_pool["removed"]),
        "alternatives_selected": len(art["alternatives"]["selected"]),
        "expert_matrices": expert_matrices,
        "aggregate_matrices": aggregates,
    }


def build_report(session: SessionState) -> dict:
    """Assemble the full decision report from a synthesized session."""
    if "synthesize" not in session.artifacts:
        raise DataError(
            f"session has not reached synthesis (cursor: {session.cursor!r})")
    art = session.artifacts
    synth = art["synthesize"]
    agg = art["aggregate"]
    criteria_order = art["criteria"]["selected"]
    leaves = art["subcriteria"]["leaves"]

    top_priorities = [
        {"label": label, "priority": agg["top"]["priorities"][label]}
        for label in criteria_order]
    leaf_globals = synth["leaf_globals"]
    globals_desc = sorted(leaf_globals.items(), key=lambda kv: (-kv[1], kv[0]))

    consistency = {
        "aggregates": {
            "top": agg["top"]["consistency"],
            **{f"sub:{p}": agg["sub"][p]["consistency"] for p in criteria_order},
            **{f"alt:{l}": agg["alt"][l]["consistency"] for l in leaves},
        },
        "experts": {
            "top": agg["top"]["expert_consistency"],
            **{f"sub:{p}": agg["sub"][p]["expert_consistency"] for p in criteria_order},
            **{f"alt:{l}": agg["alt"][l]["expert_consistency"] for l in leaves},
        },
        "flagged": agg["flagged"],
        "cr_threshold": session.config.cr_threshold,
    }

    return {
        "schema": REPORT_SCHEMA,
        "goal": session.config.goal,
        "hierarchy": synth["tree"],
        "top_priorities": top_priorities,
        "leaf_global_priorities": [
            {"label": k, "priority": v} for k, v in globals_desc],
        "alternative_scores": synth["scores"],
        "best_alternative": synth["best"],
        "consistency": consistency,
        "counts": _counts(session),
        "cost": synth["cost"],
        "provenance": {
            "backend": art["init"]["backend"],
            "template_versions": art["init"]["template_versions"],
            "deterministic": art["init"]["deterministic"],
            "aggregation": session.config.aggregation,
        },
    }


def _fmt(x: float, places: int = 4) -> str:
    return f"{x:.{places}f}"


def render_markdown(report: dict) -> str:
    lines = [f"# Decision report: {report['goal']}", ""]
    scores = report["alternative_scores"]["scores"]
    lines.append(
        f"Best alternative: **{report['best_alternative']}** "
        f"(score {_fmt(scores[report['best_alternative']])})")
    lines.append("")

    lines.append("## Top-level criteria priorities")
    lines.append("")
    for k, entry in enumerate(report["top_priorities"], start=1):
        lines.append(f"{k}. {entry['label']}: {_fmt(entry['priority'], 3)}")
    lines.append("")

    lines.append("## Global sub-criteria priorities")
    lines.append("")
    for k, entry in enumerate(report["leaf_global_priorities"], start=1):
        lines.append(f"{k}. {entry['label']}: {_fmt(entry['priority'])}")
    lines.append("")

    lines.append("## Alternative scores")
    lines.append("")
    for k, alt in enumerate(report["alternative_scores"]["ranking"], start=1):
        lines.append(f"{k}. {alt}: {_fmt(scores[alt])}")
    lines.append("")

    lines.append("## Consistency")
    lines.append("")
    aggregates = report["consistency"]["aggregates"]
    top = aggregates["top"]
    lines.append(
        f"- Top-level aggregate: lambda_max {_fmt(top['lambda_max'], 3)}, "
        f"CI {_fmt(top['ci'], 3)}, CR {_fmt(top['cr'], 3)} "
        f"({'consistent' if top['consistent'] else 'INCONSISTENT'})")
    sub_crs = [v["cr"] for k, v in aggregates.items() if k.startswith("sub:")]
    alt_crs = [v["cr"] for k, v in aggregates.items() if k.startswith("alt:")]
    if sub_crs:
        lines.append(
            f"- Sub-criteria aggregates: CR range "
            f"{_fmt(min(sub_crs), 3)} to {_fmt(max(sub_crs), 3)}")
    if alt_crs:
        lines.append(
            f"- Alternative aggregates: CR range "
            f"{_fmt(min(alt_crs), 3)} to {_fmt(max(alt_crs), 3)}")
    flagged = report["consistency"]["flagged"]
    threshold = report["consistency"]["cr_threshold"]
    if flagged:
        lines.append(f"- Flagged (CR >= {threshold}): " + ", ".join(flagged))
    else:
        lines.append(f"- All aggregate matrices pass CR < {threshold}")
    lines.append("")

    lines.append("## Counts")
    lines.append("")
    counts = report["counts"]
    lines.append(
        f"- Criteria candidates: {counts['criteria_candidates']} "
        f"(after dedupe: {counts['criteria_after_dedupe']})")
    lines.append(
        f"- Sub-criteria candidates: {counts['subcriteria_candidates']} "
        f"(leaf criteria: {counts['leaf_criteria']})")
    lines.append(
        f"- Alternative candidates: {counts['alternative_candidates']} "
        f"(selected: {counts['alternatives_selected']})")
    lines.append(
        f"- Matrices: {counts['expert_matrices']} expert-built, "
        f"{counts['aggregate_matrices']} aggregates")
    lines.append("")

    lines.append("## Cost")
    lines.append("")
    cost = report["cost"]
    for pid, entry in sorted(cost["per_persona"].items()):
        lines.append(
            f"- {pid} ({entry['role']}): {entry['words']} words, "
            f"{entry['tokens']} tokens, ${entry['cost']}")
    lines.append(f"- Expert panel total: ${cost['panel_total']}")
    lines.append(f"- Guide overhead: ${cost['guide_total']}")
    lines.append(
        f"- Grand total: ${cost['grand_total']} "
        f"(headline, rounded up: ${cost['headline_total']})")
    lines.append(
        f"- Conversion: {cost['tokens_per_word']} tokens/word at "
        f"${cost['blended_per_1k']} per 1k tokens (blended)")
    lines.append("")

    prov = report["provenance"]
    lines.append("## Provenance")
    lines.append("")
    lines.append(f"- Backend: {prov['backend']}")
    lines.append(f"- Aggregation: {prov['aggregation']}")
    lines.append(f"- Deterministic run: {str(prov['deterministic']).lower()}")
    versions = ", ".join(f"{k}={v[:8]}" for k, v in sorted(prov["template_versions"].items()))
    lines.append(f"- Templates: {versions}")
    lines.append("")
    return "\n".join(lines)
