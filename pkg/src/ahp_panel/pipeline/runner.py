"""Stage-by-stage execution of the decision workflow.

Stages run strictly in order against a checkpointed session: advise,
personas, the three elicitation funnels, the three pairwise rounds,
aggregation, and synthesis. Per-expert work inside a stage fans out up to
the configured parallelism; every stage stages its work on copies and
commits atomically, so an abort leaves the session exactly as checkpointed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from ..elicitation import Candidate, CandidatePool, dedupe, select_top_n, tally
from ..errors import ContextBudgetExceeded, DataError, RepairExhausted, StageAbort
from ..experts.backends import Conversation, make_backend, rotate_conversation
from ..experts.costs import Pricing, estimate_cost
from ..experts.parsing import (
    parse_ballot,
    parse_expert_count_advice,
    parse_grouped_items,
    parse_item_list,
    parse_levels_advice,
    parse_matrix,
    split_matrix_sections,
)
from ..experts.personas import ExpertPersona, load_personas
from ..experts.prompts import load_templates, render_prompt, template_versions
from ..experts.repair import ask_structured
from ..experts.script_handlers import DEFAULT_HANDLERS
from ..hierarchy import HierarchyTree, global_leaf_priorities, score_alternatives
from ..matrices import PairwiseMatrix, aggregate, consistency
from .config import DEFAULT_SCALE_INSTRUCTIONS, resolve_path
from .session import STAGES, SessionState, stage_index

ALTERNATIVE_MAX_WORDS = 8


def _chunk(seq, size):
    seq = list(seq)
    return [seq[i:i + size] for i in range(0, len(seq), size)]


class PipelineRunner:
    def __init__(self, session: SessionState, backend=None, templates=None):
        self.session = session
        self.config = session.config
        self.templates = templates or load_templates()
        self.backend = backend or make_backend(
            self.config.backend_kind, self.config.backend_settings,
            handlers=DEFAULT_HANDLERS)
        self.guide, self._file_experts = self._resolve_personas()
        self._recap_items: list = []
        self._work_convs: dict = {}
        self._work_archive: dict = {}

    # ------------------------------------------------------------------ setup

    def _resolve_personas(self):
        """The guide persona comes from the configured roster or the bundled one."""
        source = self.config.personas_file or resolve_path("pkg:personas.json")
        roster = load_personas(source)
        guides = [p for p in roster if p.role == "guide"]
        experts = [p for p in roster if p.role == "expert"]
        if not guides:
            bundled = load_personas(resolve_path("pkg:personas.json"))
            guides = [p for p in bundled if p.role == "guide"]
        return guides[0], experts

    @property
    def experts(self) -> list:
        """Panel personas, available once the personas stage has run."""
        artifact = self.session.artifacts.get("personas")
        if artifact is None:
            raise DataError("personas stage has not run yet")
        return [ExpertPersona.from_dict(d) for d in artifact["personas"]]

    # --------------------------------------------------------- conversations

    def _conv(self, persona_id: str) -> Conversation:
        conv = self._work_convs.get(persona_id)
        if conv is None:
            conv = Conversation(persona_id=persona_id)
            self._work_convs[persona_id] = conv
        return conv

    def _rotate(self, persona_id: str, recap_items) -> None:
        conv = self._work_convs.get(persona_id)
        carry = ""
        if recap_items:
            carry = render_prompt(
                self.templates["carryover"],
                {"items": "\n".join(f"- {x}" for x in recap_items)})
        if conv is not None and conv.messages:
            self._work_archive.setdefault(persona_id, []).append(conv.to_dict())
            self._work_convs[persona_id] = rotate_conversation(conv, carry)
        else:
            self._work_convs[persona_id] = Conversation(
                persona_id=persona_id, pending_carryover=carry)

    def _rotate_panel(self, recap_items) -> None:
        for persona in self.experts:
            self._rotate(persona.id, recap_items)

    def _ask(self, persona, prompt: str, parser, stage: str):
        """Elicit one structured reply, rotating on context-budget pressure."""
        cfg = self.config
        conv = self._conv(persona.id)
        if conv.messages and conv.token_count >= cfg.rotation_threshold * cfg.context_budget:
            self._rotate(persona.id, self._recap_items)
        for attempt in (0, 1):
            try:
                value, conv, repairs = ask_structured(
                    self.backend, persona, self._conv(persona.id), prompt, parser,
                    stage=stage,
                    reminder_template=self.templates["repair_reminder"],
                    max_repairs=cfg.max_repairs,
                    context_budget=cfg.context_budget,
                    tokens_per_word=cfg.tokens_per_word)
                self._work_convs[persona.id] = conv
                return value, repairs
            except ContextBudgetExceeded:
                if attempt:
                    raise
                self._rotate(persona.id, self._recap_items)
        raise AssertionError("unreachable")

    def _fanout(self, personas, fn):
        """Apply ``fn`` per persona, preserving panel order in the results."""
        personas = list(personas)
        if self.config.parallelism <= 1 or len(personas) <= 1:
            return [fn(p) for p in personas]
        workers = min(self.config.parallelism, len(personas))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, p) for p in personas]
            return [f.result() for f in futures]

    # ---------------------------------------------------------------- stages

    def run_stage(self, stage: str) -> SessionState:
        """Run one stage if it is next; completed stages are a strict no-op."""
        if stage == "done":
            raise DataError("'done' is a terminal cursor, not a runnable stage")
        stage_index(stage)
        if self.session.completed(stage):
            return self.session
        if stage != self.session.cursor:
            raise DataError(
                f"cannot run stage {stage!r}: next stage is {self.session.cursor!r}")

        self._work_convs = {
            pid: Conversation.from_dict(d)
            for pid, d in self.session.conversations.get("active", {}).items()
        }
        self._work_archive = {
            pid: list(items)
            for pid, items in self.session.conversations.get("archived", {}).items()
        }
        impl = getattr(self, f"_stage_{stage}")
        try:
            artifact = impl()
        except RepairExhausted as exc:
            abort = StageAbort(
                f"stage {stage!r} aborted: {exc} (session left at last checkpoint)")
            abort.failure = {
                "stage": stage,
                "expert": exc.expert_id,
                "violation": str(exc.last_violation),
                "conversation": getattr(exc, "conversation", None) and
                getattr(exc, "conversation").to_dict(),
            }
            raise abort from exc

        self.session.artifacts[stage] = artifact
        self.session.conversations = {
            "active": {pid: c.to_dict() for pid, c in self._work_convs.items()},
            "archived": self._work_archive,
        }
        self.session.cursor = STAGES[stage_index(stage) + 1]
        self.session.save()
        return self.session

    def run_all(self) -> SessionState:
        while not self.session.done:
            self.run_stage(self.session.cursor)
        return self.session

    def _stage_init(self) -> dict:
        return {
            "backend": self.backend.kind,
            "goal": self.config.goal,
            "template_versions": template_versions(self.templates),
            "deterministic": self.backend.kind in ("scripted", "replay"),
        }

    def _stage_advise(self) -> dict:
        cfg = self.config
        artifact = {
            "expert_count": cfg.expert_count,
            "levels": cfg.levels,
            "suggested_expert_range": None,
            "suggested_levels": None,
            "warnings": [],
            "skipped": not cfg.run_advise,
        }
        if not cfg.run_advise:
            return artifact
        from ..experts.backends import converse

        conv = self._conv(self.guide.id)
        prompt = render_prompt(self.templates["advise_expert_count"], {"goal": cfg.goal})
        reply, conv = converse(self.backend, self.guide, conv, prompt,
                               context_budget=cfg.context_budget,
                               tokens_per_word=cfg.tokens_per_word)
        suggested = parse_expert_count_advice(reply)
        prompt = render_prompt(self.templates["advise_levels"], {})
        reply2, conv = converse(self.backend, self.guide, conv, prompt,
                                context_budget=cfg.context_budget,
                                tokens_per_word=cfg.tokens_per_word)
        levels = parse_levels_advice(reply2)
        self._work_convs[self.guide.id] = conv

        if suggested is None:
            artifact["warnings"].append(
                "expert-count advice was unparseable; using configured count")
        else:
            artifact["suggested_expert_range"] = list(suggested)
            if not (suggested[0] <= cfg.expert_count <= suggested[1]):
                artifact["warnings"].append(
                    f"configured expert_count {cfg.expert_count} is outside the "
                    f"suggested range {suggested[0]}-{suggested[1]}")
        if levels is not None:
            artifact["suggested_levels"] = levels
            if levels != cfg.levels:
                artifact["warnings"].append(
                    f"suggested {levels} criteria levels clamped to {cfg.levels}")
        return artifact

    def _stage_personas(self) -> dict:
        cfg = self.config
        if cfg.personas_file:
            experts = self._file_experts
            if len(experts) != cfg.expert_count:
                raise DataError(
                    f"persona file has {len(experts)} experts, config wants "
                    f"{cfg.expert_count}")
            return {"source": "file", "personas": [p.to_dict() for p in experts],
                    "repairs": {}}
        prompt = render_prompt(self.templates["generate_personas"],
                               {"n": cfg.expert_count})
        from ..experts.personas import parse_personas_reply

        personas, repairs = self._ask(
            self.guide, prompt,
            lambda r: parse_personas_reply(r, cfg.expert_count), "personas")
        return {
            "source": "guide",
            "personas": [p.to_dict() for p in personas],
            "repairs": {self.guide.id: repairs} if repairs else {},
        }

    def _numbered_items(self, labels) -> str:
        return "\n".join(f"{k}. {label}" for k, label in enumerate(labels, start=1))

    def _stage_criteria(self) -> dict:
        cfg = self.config
        experts = self.experts
        self._recap_items = [f"Goal: {cfg.goal}"]
        repairs: dict = {}

        prompt = render_prompt(self.templates["propose_criteria"], {
            "goal": cfg.goal, "n": cfg.top_criteria_count,
            "max_words": cfg.max_label_words})

        def propose(p):
            return self._ask(
                p, prompt,
                lambda r: parse_item_list(r, cfg.top_criteria_count, cfg.max_label_words),
                "criteria")

        proposals = self._fanout(experts, propose)
        items = []
        for persona, (labels, rep) in zip(experts, proposals):
            items.extend(Candidate(label, persona.id) for label in labels)
            if rep:
                repairs[persona.id] = rep
        pool = dedupe(CandidatePool(stage="criteria", items=items))

        ballot_prompt = render_prompt(self.templates["ballot_criteria"], {
            "scale_instructions": DEFAULT_SCALE_INSTRUCTIONS,
            "n": len(pool.items),
            "items": self._numbered_items(pool.labels())})

        def vote(p):
            return self._ask(
                p, ballot_prompt,
                lambda r: parse_ballot(r, pool.labels(), p.id), "criteria")

        votes = self._fanout(experts, vote)
        ballots = []
        for persona, (ballot, rep) in zip(experts, votes):
            ballots.append(ballot)
            if rep:
                repairs.setdefault(persona.id, []).extend(rep)
        result = tally(ballots, pool)
        selected = select_top_n(result, cfg.top_criteria_count)
        return {
            "pool": pool.to_dict(),
            "ballots": {
                b.expert_id: {result.display[k]: v for k, v in sorted(b.scores.items())}
                for b in ballots},
            "totals": result.to_dict()["totals"],
            "selected": selected,
            "repairs": repairs,
        }

    def _stage_subcriteria(self) -> dict:
        cfg = self.config
        experts = self.experts
        selected = self.session.artifacts["criteria"]["selected"]
        self._rotate_panel([f"Goal: {cfg.goal}",
                            "Selected top-level criteria: " + ", ".join(selected)])
        self._recap_items = ["Selected top-level criteria: " + ", ".join(selected)]
        repairs: dict = {}

        prompt = render_prompt(self.templates["propose_subcriteria"], {
            "n": cfg.sub_per_criterion, "items": ", ".join(selected),
            "max_words": cfg.max_label_words})

        def propose(p):
            return self._ask(
                p, prompt,
                lambda r: parse_grouped_items(
                    r, selected, cfg.sub_per_criterion, cfg.max_label_words),
                "subcriteria")

        proposals = self._fanout(experts, propose)
        for persona, (_, rep) in zip(experts, proposals):
            if rep:
                repairs[persona.id] = rep

        per_parent = {}
        subs_by_parent = {}
        for parent in selected:
            items = []
            for persona, (groups, _) in zip(experts, proposals):
                items.extend(Candidate(label, persona.id) for label in groups[parent])
            pool = dedupe(CandidatePool(stage=f"sub-criteria:{parent}", items=items))
            ballot_prompt = render_prompt(self.templates["ballot_subcriteria"], {
                "parent": parent,
                "scale_instructions": DEFAULT_SCALE_INSTRUCTIONS,
                "n": len(pool.items),
                "items": self._numbered_items(pool.labels())})

            def vote(p, _prompt=ballot_prompt, _pool=pool):
                return self._ask(
                    p, _prompt,
                    lambda r: parse_ballot(r, _pool.labels(), p.id), "subcriteria")

            votes = self._fanout(experts, vote)
            ballots = []
            for persona, (ballot, rep) in zip(experts, votes):
                ballots.append(ballot)
                if rep:
                    repairs.setdefault(persona.id, []).extend(rep)
            result = tally(ballots, pool)
            chosen = select_top_n(result, cfg.sub_per_criterion)
            subs_by_parent[parent] = chosen
            per_parent[parent] = {
                "pool": pool.to_dict(),
                "ballots": {
                    b.expert_id: {result.display[k]: v for k, v in sorted(b.scores.items())}
                    for b in ballots},
                "totals": result.to_dict()["totals"],
                "selected": chosen,
            }
        leaves = [sub for parent in selected for sub in subs_by_parent[parent]]
        return {"per_parent": per_parent, "subs_by_parent": subs_by_parent,
                "leaves": leaves, "repairs": repairs}

    def _tree_outline_items(self) -> list:
        subs = self.session.artifacts["subcriteria"]["subs_by_parent"]
        lines = []
        for parent in self.session.artifacts["criteria"]["selected"]:
            lines.append(f"{parent}: " + "; ".join(subs[parent]))
        return lines

    def _stage_alternatives(self) -> dict:
        cfg = self.config
        experts = self.experts
        self._rotate_panel(
            ["Criteria tree committed"] + self._tree_outline_items())
        self._recap_items = ["Criteria tree committed"] + self._tree_outline_items()
        repairs: dict = {}

        prompt = render_prompt(self.templates["propose_alternatives"], {
            "n": cfg.alternatives_per_expert, "goal": cfg.goal})

        def propose(p):
            return self._ask(
                p, prompt,
                lambda r: parse_item_list(
                    r, cfg.alternatives_per_expert, ALTERNATIVE_MAX_WORDS),
                "alternatives")

        proposals = self._fanout(experts, propose)
        items = []
        for persona, (labels, rep) in zip(experts, proposals):
            items.extend(Candidate(label, persona.id) for label in labels)
            if rep:
                repairs[persona.id] = rep
        pool = dedupe(CandidatePool(stage="alternatives", items=items))

        ballot_prompt = render_prompt(self.templates["ballot_alternatives"], {
            "n": len(pool.items),
            "scale_instructions": DEFAULT_SCALE_INSTRUCTIONS,
            "goal": cfg.goal,
            "items": self._numbered_items(pool.labels())})

        def vote(p):
            return self._ask(
                p, ballot_prompt,
                lambda r: parse_ballot(r, pool.labels(), p.id), "alternatives")

        votes = self._fanout(experts, vote)
        ballots = []
        for persona, (ballot, rep) in zip(experts, votes):
            ballots.append(ballot)
            if rep:
                repairs.setdefault(persona.id, []).extend(rep)
        result = tally(ballots, pool)
        selected = select_top_n(result, cfg.final_alternative_count)
        return {
            "pool": pool.to_dict(),
            "ballots": {
                b.expert_id: {result.display[k]: v for k, v in sorted(b.scores.items())}
                for b in ballots},
            "totals": result.to_dict()["totals"],
            "selected": selected,
            "repairs": repairs,
        }

    def _stage_pairwise_top(self) -> dict:
        cfg = self.config
        experts = self.experts
        criteria = self.session.artifacts["criteria"]["selected"]
        recap = ["Top-level criteria to compare: " + ", ".join(criteria)]
        self._rotate_panel(recap)
        self._recap_items = recap
        repairs: dict = {}

        prompt = render_prompt(self.templates["pairwise_top"], {
            "items": ", ".join(criteria), "goal": cfg.goal})

        def build(p):
            return self._ask(
                p, prompt, lambda r: parse_matrix(r, criteria), "pairwise_top")

        results = self._fanout(experts, build)
        matrices = {}
        for persona, (matrix, rep) in zip(experts, results):
            matrices[persona.id] = matrix.to_dict()
            if rep:
                repairs[persona.id] = rep
        return {"matrices": matrices, "repairs": repairs}

    def _stage_pairwise_sub(self) -> dict:
        cfg = self.config
        experts = self.experts
        criteria = self.session.artifacts["criteria"]["selected"]
        subs = self.session.artifacts["subcriteria"]["subs_by_parent"]
        recap = ["Criteria tree committed"] + self._tree_outline_items()
        self._rotate_panel(recap)
        self._recap_items = recap
        repairs: dict = {}
        batches = _chunk(criteria, cfg.matrix_batch_size)

        def build(p):
            out = {}
            collected = []
            for batch in batches:
                outline = []
                for parent in batch:
                    outline.append(f"- {parent}:")
                    outline.extend(f"    {s}" for s in subs[parent])
                prompt = render_prompt(self.templates["pairwise_sub"], {
                    "sub_per_top": cfg.sub_per_criterion,
                    "n": len(batch),
                    "items": "\n".join(outline)})

                def parse_batch(reply, _batch=batch):
                    sections = split_matrix_sections(reply, _batch)
                    return {
                        parent: parse_matrix(sections[parent], subs[parent])
                        for parent in _batch}

                parsed, rep = self._ask(p, prompt, parse_batch, "pairwise_sub")
                out.update(parsed)
                collected.extend(rep)
            return out, collected

        results = self._fanout(experts, build)
        matrices = {parent: {} for parent in criteria}
        for persona, (per_parent, rep) in zip(experts, results):
            for parent, matrix in per_parent.items():
                matrices[parent][persona.id] = matrix.to_dict()
            if rep:
                repairs[persona.id] = rep
        return {"matrices": matrices, "repairs": repairs}

    def _stage_pairwise_alt(self) -> dict:
        cfg = self.config
        experts = self.experts
        leaves = self.session.artifacts["subcriteria"]["leaves"]
        alternatives = self.session.artifacts["alternatives"]["selected"]
        recap = (["Criteria tree committed"] + self._tree_outline_items()
                 + ["Alternatives: " + ", ".join(alternatives)])
        self._rotate_panel(recap)
        self._recap_items = recap
        repairs: dict = {}
        batches = _chunk(leaves, cfg.matrix_batch_size)

        def build(p):
            out = {}
            collected = []
            for batch in batches:
                prompt = render_prompt(self.templates["pairwise_alt"], {
                    "n": len(batch),
                    "items": ", ".join(batch),
                    "alternatives": ", ".join(alternatives)})

                def parse_batch(reply, _batch=batch):
                    sections = split_matrix_sections(reply, _batch)
                    return {
                        leaf: parse_matrix(sections[leaf], alternatives)
                        for leaf in _batch}

                parsed, rep = self._ask(p, prompt, parse_batch, "pairwise_alt")
                out.update(parsed)
                collected.extend(rep)
            return out, collected

        results = self._fanout(experts, build)
        matrices = {leaf: {} for leaf in leaves}
        for persona, (per_leaf, rep) in zip(experts, results):
            for leaf, matrix in per_leaf.items():
                matrices[leaf][persona.id] = matrix.to_dict()
            if rep:
                repairs[persona.id] = rep
        return {"matrices": matrices, "repairs": repairs}

    def _aggregate_node(self, expert_matrices: dict) -> dict:
        cfg = self.config
        order = [p.id for p in self.experts]
        ms = [PairwiseMatrix.from_dict(expert_matrices[pid]) for pid in order]
        agg = aggregate(ms, method=cfg.aggregation)
        weights, report = consistency(agg, threshold=cfg.cr_threshold)
        expert_reports = {}
        for pid, m in zip(order, ms):
            _, rep = consistency(m, threshold=cfg.cr_threshold)
            expert_reports[pid] = rep.to_dict()
        return {
            "matrix": agg.to_dict(),
            "priorities": dict(zip(weights.labels, weights.weights)),
            "consistency": report.to_dict(),
            "expert_consistency": expert_reports,
        }

    def _stage_aggregate(self) -> dict:
        artifacts = self.session.artifacts
        out = {
            "top": self._aggregate_node(artifacts["pairwise_top"]["matrices"]),
            "sub": {}, "alt": {}, "flagged": [],
        }
        if not out["top"]["consistency"]["consistent"]:
            out["flagged"].append("top")
        for parent, per_expert in artifacts["pairwise_sub"]["matrices"].items():
            node = self._aggregate_node(per_expert)
            out["sub"][parent] = node
            if not node["consistency"]["consistent"]:
                out["flagged"].append(f"sub:{parent}")
        for leaf, per_expert in artifacts["pairwise_alt"]["matrices"].items():
            node = self._aggregate_node(per_expert)
            out["alt"][leaf] = node
            if not node["consistency"]["consistent"]:
                out["flagged"].append(f"alt:{leaf}")
        if out["flagged"] and self.config.strict_consistency:
            raise StageAbort(
                "strict consistency mode: aggregate matrices flagged: "
                + ", ".join(out["flagged"]))
        return out

    def _stage_synthesize(self) -> dict:
        cfg = self.config
        artifacts = self.session.artifacts
        criteria = artifacts["criteria"]["selected"]
        subs = artifacts["subcriteria"]["subs_by_parent"]
        alternatives = artifacts["alternatives"]["selected"]
        agg = artifacts["aggregate"]

        tree = HierarchyTree.build(cfg.goal, criteria, subs, alternatives)
        locals_map = {None: agg["top"]["priorities"]}
        for parent in criteria:
            locals_map[parent] = agg["sub"][parent]["priorities"]
        tree = tree.with_local_priorities(locals_map)
        tree = global_leaf_priorities(tree)
        leaf_globals = {c.label: c.global_priority for c in tree.leaves()}
        alt_locals = {leaf: agg["alt"][leaf]["priorities"] for leaf in leaf_globals}
        scores = score_alternatives(leaf_globals, alt_locals)

        pricing = Pricing.from_strings(
            cfg.pricing_input_per_1k, cfg.pricing_output_per_1k,
            cfg.pricing_blended_per_1k)
        conversations = []
        for pid, items in sorted(self._work_archive.items()):
            conversations.extend(Conversation.from_dict(d) for d in items)
        for pid in sorted(self._work_convs):
            conversations.append(self._work_convs[pid])
        roles = {p.id: p.role for p in self.experts}
        roles[self.guide.id] = "guide"
        cost = estimate_cost(conversations, pricing, roles=roles,
                             tokens_per_word=cfg.tokens_per_word)

        return {
            "tree": tree.to_dict(),
            "leaf_globals": leaf_globals,
            "scores": scores.to_dict(),
            "best": scores.best,
            "flagged": agg["flagged"],
            "cost": cost.to_dict(),
        }
