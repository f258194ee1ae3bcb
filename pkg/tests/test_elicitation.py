"""Pooling, dedupe, score voting, and top-n selection."""

import pytest

from ahp_panel.elicitation import (
    Candidate,
    CandidatePool,
    ScoreBallot,
    dedupe,
    normalize_label,
    select_top_n,
    tally,
)
from ahp_panel.errors import DataError


def pool_of(labels_with_proposers, stage="criteria"):
    return CandidatePool(
        stage=stage,
        items=[Candidate(label, who) for label, who in labels_with_proposers])


class TestNormalizeLabel:
    def test_whitespace_and_case(self):
        assert normalize_label("Employee  Training ") == "employee training"

    def test_case_insensitive_equality(self):
        assert normalize_label("Access Control") == normalize_label("access control")

    def test_no_stemming(self):
        assert normalize_label("Communication Protocols") != normalize_label(
            "Communication Protocol")

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            normalize_label("   ")


class TestDedupe:
    def test_keep_first_and_log_removed(self):
        pool = pool_of([("Access Control", "e1"), ("access  control", "e2"),
                        ("Audit Trails", "e2")])
        out = dedupe(pool)
        assert out.labels() == ["Access Control", "Audit Trails"]
        assert [c.proposer for c in out.removed] == ["e2"]

    def test_all_distinct_unchanged(self):
        pool = pool_of([("A", "e1"), ("B", "e2"), ("C", "e3")])
        out = dedupe(pool)
        assert out.items == pool.items
        assert out.removed == ()

    def test_three_copies_keep_first_proposer(self):
        pool = pool_of([("Same", "e1"), ("Same", "e2"), ("same", "e3")])
        out = dedupe(pool)
        assert len(out.items) == 1
        assert out.items[0].proposer == "e1"

    def test_idempotent(self):
        pool = pool_of([("A", "e1"), ("a", "e2"), ("B", "e1")])
        once = dedupe(pool)
        assert dedupe(once) == once

    def test_49_to_45_shape(self):
        # 49 proposals with four exact repeats funnel to 45, like the
        # bundled criteria stage
        labels = [(f"criterion {i}", f"e{i % 7}") for i in range(45)]
        dups = [("Criterion 1", "e5"), ("criterion 2", "e6"),
                ("criterion 3", "e0"), ("CRITERION 4", "e1")]
        pool = pool_of(labels + dups)
        assert len(pool.items) == 49
        out = dedupe(pool)
        assert len(out.items) == 45
        assert len(out.removed) == 4

    def test_empty_pool_rejected(self):
        with pytest.raises(DataError):
            dedupe(CandidatePool(stage="criteria"))


class TestTally:
    def test_sums_scores(self):
        pool = pool_of([("Item", "e1")])
        ballots = [ScoreBallot(f"e{k}", {"Item": s}) for k, s in enumerate((5, 7, 9))]
        result = tally(ballots, pool)
        assert result.totals[normalize_label("Item")] == 21

    def test_maximum_with_seven_experts(self):
        pool = pool_of([("Item", "e1")])
        ballots = [ScoreBallot(f"e{k}", {"Item": 9}) for k in range(7)]
        assert tally(ballots, pool).totals["item"] == 63

    def test_tie_recorded(self):
        pool = pool_of([("A", "e1"), ("B", "e2")])
        ballots = [ScoreBallot("e1", {"A": 3, "B": 2}), ScoreBallot("e2", {"A": 3, "B": 4})]
        totals = tally(ballots, pool).totals
        assert totals["a"] == 6 and totals["b"] == 6

    def test_linearity_of_all_ones_ballot(self):
        pool = pool_of([("A", "e1"), ("B", "e2"), ("C", "e3")])
        ballots = [ScoreBallot("e1", {"A": 4, "B": 6, "C": 2})]
        base = tally(ballots, pool).totals
        bumped = tally(ballots + [ScoreBallot("e2", {"A": 1, "B": 1, "C": 1})], pool).totals
        assert all(bumped[k] == base[k] + 1 for k in base)

    def test_ballot_errors(self):
        pool = pool_of([("A", "e1"), ("B", "e2")])
        with pytest.raises(DataError):
            tally([ScoreBallot("e1", {"A": 5})], pool)  # missing B
        with pytest.raises(DataError):
            tally([ScoreBallot("e1", {"A": 5, "B": 5, "C": 5})], pool)  # extra C
        with pytest.raises(DataError):
            tally([ScoreBallot("e1", {"A": 0, "B": 5})], pool)  # below scale
        with pytest.raises(DataError):
            tally([ScoreBallot("e1", {"A": 10, "B": 5})], pool)  # above scale
        with pytest.raises(DataError):
            tally([], pool)


class TestSelectTopN:
    def test_select_all(self):
        pool = pool_of([("A", "e1"), ("B", "e2")])
        result = tally([ScoreBallot("e1", {"A": 5, "B": 3})], pool)
        assert select_top_n(result, 2) == ["A", "B"]

    def test_lexicographic_tie_break(self):
        pool = pool_of([("b-item", "e1"), ("a-item", "e2"), ("c-item", "e3")])
        result = tally(
            [ScoreBallot("e1", {"b-item": 9, "a-item": 9, "c-item": 4})], pool)
        assert select_top_n(result, 1) == ["a-item"]

    def test_rank_order_and_bounds(self):
        pool = pool_of([("A", "e1"), ("B", "e2"), ("C", "e3")])
        result = tally([ScoreBallot("e1", {"A": 2, "B": 9, "C": 5})], pool)
        assert select_top_n(result, 2) == ["B", "C"]
        with pytest.raises(DataError):
            select_top_n(result, 4)

    def test_monotonicity_under_score_raise(self):
        pool = pool_of([("A", "e1"), ("B", "e2"), ("C", "e3")])
        low = [ScoreBallot("e1", {"A": 5, "B": 5, "C": 1}),
               ScoreBallot("e2", {"A": 4, "B": 6, "C": 2})]
        selected_before = set(select_top_n(tally(low, pool), 2))
        raised = [ScoreBallot("e1", {"A": 6, "B": 5, "C": 1}), low[1]]
        selected_after = set(select_top_n(tally(raised, pool), 2))
        assert "A" in selected_before
        assert "A" in selected_after

    def test_determinism(self):
        pool = pool_of([(f"i{k}", "e1") for k in range(10)])
        ballots = [ScoreBallot("e1", {f"i{k}": (k * 3) % 9 + 1 for k in range(10)})]
        first = select_top_n(tally(ballots, pool), 4)
        for _ in range(5):
            assert select_top_n(tally(ballots, pool), 4) == first
