"""Conversations, backends, rotation, repair loop, and cost accounting."""

import json

import pytest

from ahp_panel.errors import (
    BackendError,
    ContextBudgetExceeded,
    CredentialError,
    DataError,
    ParseViolation,
    RepairExhausted,
    ReplayDivergence,
)
from ahp_panel.experts.backends import (
    Conversation,
    LiveBackend,
    Message,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    converse,
    estimate_tokens,
    make_backend,
    prompt_hash,
    rotate_conversation,
)
from ahp_panel.experts.costs import Pricing, estimate_cost
from ahp_panel.experts.personas import ExpertPersona, load_personas, parse_personas_reply
from ahp_panel.experts.prompts import PromptTemplate, load_templates, render_prompt, template_versions
from ahp_panel.experts.repair import ask_structured

PERSONA = ExpertPersona(id="e1", name="Expert One", description="d",
                        instructions="You are expert one.")


def scripted(rules, data=None, handlers=None):
    return ScriptedBackend(rules, data=data, handlers=handlers)


class TestTemplates:
    def test_render_binds_goal(self):
        templates = load_templates()
        text = render_prompt(templates["propose_criteria"], {
            "goal": "Secure the Corporate Datacenter from Social Engineering Attacks",
            "n": 7, "max_words": 3})
        assert "First, come up with 7 top-level criteria." in text
        assert "Secure the Corporate Datacenter" in text
        assert "{" not in text

    def test_no_placeholder_template_unchanged(self):
        t = PromptTemplate("x", "No placeholders here.")
        assert render_prompt(t, {}) == "No placeholders here."

    def test_missing_binding_names_placeholder(self):
        t = PromptTemplate("x", "Goal is {goal}.")
        with pytest.raises(DataError, match="goal"):
            render_prompt(t, {})

    def test_unknown_binding_rejected(self):
        t = PromptTemplate("x", "Goal is {goal}.")
        with pytest.raises(DataError, match="extra"):
            render_prompt(t, {"goal": "g", "extra": 1})

    def test_versions_are_stable(self):
        templates = load_templates()
        v1 = template_versions(templates)
        v2 = template_versions(load_templates())
        assert v1 == v2 and "pairwise_top" in v1


class TestConversation:
    def test_alternation_enforced(self):
        with pytest.raises(DataError):
            Conversation("e1", messages=[Message("expert", "hi", 1)])
        with pytest.raises(DataError):
            Conversation("e1", messages=[Message("user", "a", 1), Message("user", "b", 1)])

    def test_token_estimate_rule(self):
        assert estimate_tokens("one two three four") == 3
        assert estimate_tokens("") == 0
        # 5800 words estimate to exactly 4350 tokens
        assert estimate_tokens("w " * 5800) == 4350

    def test_scripted_ping_pong(self):
        backend = scripted([{"match": "ping", "reply": "pong"}])
        conv = Conversation("e1")
        reply, conv = converse(backend, PERSONA, conv, "ping")
        assert reply == "pong"
        assert len(conv.messages) == 2
        assert conv.messages[0].author == "user"
        assert conv.messages[1].author == "expert"

    def test_budget_exceeded_before_send(self):
        backend = scripted([{"match": ".", "reply": "ok"}])
        conv = Conversation("e1", messages=[
            Message("user", "q", 4000), Message("expert", "a", 4100)])
        message = "w " * 266  # estimates to 200 tokens
        assert estimate_tokens(message) == 200
        with pytest.raises(ContextBudgetExceeded):
            converse(backend, PERSONA, conv, message, context_budget=8192)

    def test_token_count_monotone(self):
        backend = scripted([{"match": ".", "reply": "a reply of several words"}])
        conv = Conversation("e1")
        last = 0
        for _ in range(5):
            _, conv = converse(backend, PERSONA, conv, "another message here")
            assert conv.token_count >= last
            last = conv.token_count

    def test_round_trip_dict(self):
        conv = Conversation("e1", messages=[Message("user", "q", 1), Message("expert", "a", 2)])
        assert Conversation.from_dict(conv.to_dict()) == conv


class TestRotation:
    def test_carryover_lands_in_first_message(self):
        backend = scripted([{"match": ".", "reply": "ok"}])
        conv = Conversation("e1", messages=[Message("user", "q", 1), Message("expert", "a", 1)])
        fresh = rotate_conversation(conv, "Selected criteria: A, B, C")
        assert fresh.messages == ()
        _, fresh = converse(backend, PERSONA, fresh, "Now the next step.")
        assert fresh.messages[0].text.startswith("Selected criteria: A, B, C")
        assert "Now the next step." in fresh.messages[0].text

    def test_empty_carryover_gives_clean_seed(self):
        fresh = rotate_conversation(Conversation("e1"), "")
        backend = scripted([{"match": ".", "reply": "ok"}])
        _, fresh = converse(backend, PERSONA, fresh, "hello")
        assert fresh.messages[0].text == "hello"

    def test_two_rotations_bookkeeping(self):
        backend = scripted([{"match": ".", "reply": "ok"}])
        archive = []
        conv = Conversation("e1")
        _, conv = converse(backend, PERSONA, conv, "first stage")
        archive.append(conv)
        conv = rotate_conversation(conv, "recap one")
        _, conv = converse(backend, PERSONA, conv, "second stage")
        archive.append(conv)
        conv = rotate_conversation(conv, "recap two")
        _, conv = converse(backend, PERSONA, conv, "third stage")
        assert len(archive) == 2
        assert archive[0].messages[0].text == "first stage"
        assert conv.messages[0].text.startswith("recap two")


class TestScripted:
    def test_persona_filter_and_order(self):
        backend = scripted([
            {"match": "hello", "persona": "other", "reply": "not me"},
            {"match": "hello", "reply": "me"},
        ])
        reply, *_ = backend.exchange(PERSONA, Conversation("e1"), "hello there")
        assert reply == "me"

    def test_handler_dispatch(self):
        def shout(data, persona, conversation, prompt, match):
            return data["prefix"] + match.group("word").upper()

        backend = scripted(
            [{"match": r"say (?P<word>\w+)", "handler": "shout"}],
            data={"prefix": ">> "}, handlers={"shout": shout})
        reply, *_ = backend.exchange(PERSONA, Conversation("e1"), "say pong")
        assert reply == ">> PONG"

    def test_no_rule_is_backend_error(self):
        with pytest.raises(BackendError):
            scripted([]).exchange(PERSONA, Conversation("e1"), "anything")

    def test_determinism(self):
        backend = scripted([{"match": "x", "reply": "same"}])
        replies = {backend.exchange(PERSONA, Conversation("e1"), "x")[0] for _ in range(10)}
        assert replies == {"same"}


class TestReplay:
    def make_transcript(self, prompt, reply):
        return [{
            "persona_id": "e1",
            "prompt_hash": prompt_hash(prompt),
            "prompt": prompt,
            "reply": reply,
            "prompt_tokens": 11,
            "reply_tokens": 13,
        }]

    def test_replays_recorded_reply_with_tokens(self):
        question = "How many experts do you think we need for the optimal solution?"
        answer = ("In summary, for a decision as critical as securing a corporate "
                  "datacenter, a group of 5-7 experts from key areas would be a good balance.")
        backend = ReplayBackend(self.make_transcript(question, answer))
        reply, conv = converse(backend, PERSONA, Conversation("e1"), question)
        assert "a group of 5-7 experts" in reply
        assert conv.messages[0].token_estimate == 11
        assert conv.messages[1].token_estimate == 13

    def test_divergence_is_fatal(self):
        backend = ReplayBackend(self.make_transcript("recorded prompt", "reply"))
        with pytest.raises(ReplayDivergence):
            backend.exchange(PERSONA, Conversation("e1"), "different prompt")

    def test_recording_round_trip(self, tmp_path):
        inner = scripted([{"match": ".", "reply": "recorded answer"}])
        recorder = RecordingBackend(inner)
        _, conv = converse(recorder, PERSONA, Conversation("e1"), "the question")
        path = tmp_path / "t.json"
        recorder.save(path)
        replay = ReplayBackend.from_file(path)
        reply, _ = converse(replay, PERSONA, Conversation("e1"), "the question")
        assert reply == "recorded answer"


class TestLive:
    def test_missing_credential(self, monkeypatch):
        monkeypatch.delenv("AHP_TEST_KEY", raising=False)
        with pytest.raises(CredentialError):
            LiveBackend("https://example.invalid/v1/chat", "gpt-4", "AHP_TEST_KEY")

    def test_retry_then_success(self, monkeypatch):
        monkeypatch.setenv("AHP_TEST_KEY", "k")
        backend = LiveBackend("https://example.invalid/v1/chat", "gpt-4",
                              "AHP_TEST_KEY", backoff=0.0)
        calls = {"n": 0}

        class FakeResponse:
            def __init__(self, status, doc=None):
                self.status_code = status
                self.text = "err"
                self._doc = doc

            def json(self):
                return self._doc

        def fake_post(url, json=None, headers=None, timeout=None):
            calls["n"] += 1
            if calls["n"] < 3:
                return FakeResponse(503)
            return FakeResponse(200, {
                "choices": [{"message": {"content": "live reply"}}],
                "usage": {"prompt_tokens": 5, "completion_tokens": 7},
            })

        import requests
        monkeypatch.setattr(requests, "post", fake_post)
        reply, ptok, rtok = backend.exchange(PERSONA, Conversation("e1"), "q")
        assert reply == "live reply" and (ptok, rtok) == (5, 7)
        assert calls["n"] == 3

    def test_wire_shape(self, monkeypatch):
        monkeypatch.setenv("AHP_TEST_KEY", "secret")
        backend = LiveBackend("https://example.invalid/v1/chat", "gpt-4", "AHP_TEST_KEY")
        captured = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, payload=json, headers=headers)

            class R:
                status_code = 200
                text = ""

                def json(self):
                    return {"choices": [{"message": {"content": "ok"}}]}

            return R()

        import requests
        monkeypatch.setattr(requests, "post", fake_post)
        conv = Conversation("e1", messages=[Message("user", "q1", 1), Message("expert", "a1", 1)])
        backend.exchange(PERSONA, conv, "q2")
        msgs = captured["payload"]["messages"]
        assert msgs[0] == {"role": "system", "content": PERSONA.instructions}
        assert [m["role"] for m in msgs] == ["system", "user", "assistant", "user"]
        assert captured["payload"]["model"] == "gpt-4"
        assert captured["headers"]["Authorization"] == "Bearer secret"

    def test_make_backend_validation(self):
        with pytest.raises(DataError):
            make_backend("scripted", {})
        with pytest.raises(DataError):
            make_backend("replay", {})
        with pytest.raises(DataError):
            make_backend("live", {"endpoint": "x", "model": "y"})
        with pytest.raises(DataError):
            make_backend("psychic", {})


class TestRepairLoop:
    def reminder(self):
        return PromptTemplate("repair_reminder", "Fix it: {items}. Try again.")

    def test_valid_reply_needs_no_repair(self):
        backend = scripted([{"match": ".", "reply": "42"}])
        value, conv, log = ask_structured(
            backend, PERSONA, Conversation("e1"), "number?", int,
            reminder_template=self.reminder())
        assert value == 42 and log == [] and len(conv.messages) == 2

    def test_repair_recovers(self):
        replies = iter(["not a number", "7"])

        class Flaky:
            kind = "scripted"

            def exchange(self, persona, conversation, prompt):
                return next(replies), None, None

        def parse(reply):
            if not reply.strip().isdigit():
                raise ParseViolation("not numeric", f"got {reply!r}")
            return int(reply)

        value, conv, log = ask_structured(
            Flaky(), PERSONA, Conversation("e1"), "number?", parse,
            reminder_template=self.reminder(), max_repairs=2)
        assert value == 7
        assert len(log) == 1 and log[0]["rule"] == "not numeric"
        assert "Fix it: not numeric" in conv.messages[2].text

    def test_budget_exhaustion_preserves_transcript(self):
        backend = scripted([{"match": ".", "reply": "still wrong"}])

        def parse(reply):
            raise ParseViolation("bad", "always")

        with pytest.raises(RepairExhausted) as err:
            ask_structured(backend, PERSONA, Conversation("e1"), "q", parse,
                           reminder_template=self.reminder(), max_repairs=2, stage="criteria")
        exc = err.value
        assert exc.stage == "criteria" and exc.expert_id == "e1"
        # initial ask + two repairs, each a user/expert pair
        assert len(exc.conversation.messages) == 6


class TestCosts:
    def expert_conv(self, pid, tokens):
        return Conversation(pid, messages=[
            Message("user", "q", tokens // 2), Message("expert", "a", tokens - tokens // 2)])

    def test_single_expert_rounding(self):
        pricing = Pricing.from_strings("0.06", "0.12", "0.10")
        report = estimate_cost([self.expert_conv("e1", 4350)], pricing)
        assert report.per_persona["e1"]["cost"] == "0.44"
        assert report.panel_total == "0.44"

    def test_zero_tokens_zero_cost(self):
        pricing = Pricing.from_strings("0.06", "0.12", "0.10")
        report = estimate_cost([Conversation("e1")], pricing)
        assert report.per_persona["e1"]["cost"] == "0.00"
        assert report.headline_total == 0

    def test_seven_experts_panel_total(self):
        pricing = Pricing.from_strings("0.06", "0.12", "0.10")
        convs = [self.expert_conv(f"e{k}", 4350) for k in range(7)]
        report = estimate_cost(convs, pricing)
        assert report.panel_total == "3.08"

    def test_guide_separated_and_headline_rounds_up(self):
        pricing = Pricing.from_strings("0.06", "0.12", "0.10")
        convs = [self.expert_conv(f"e{k}", 4350) for k in range(7)]
        convs.append(self.expert_conv("guide", 900))
        report = estimate_cost(convs, pricing, roles={"guide": "guide"})
        assert report.guide_total == "0.09"
        assert report.grand_total == "3.17"
        assert report.headline_total == 4

    def test_missing_pricing(self):
        with pytest.raises(DataError):
            estimate_cost([], None)


class TestPersonas:
    def test_load_fixture_roster(self, fixture_dir):
        personas = load_personas(fixture_dir / "personas.json")
        assert len(personas) == 8
        guide = [p for p in personas if p.role == "guide"]
        assert len(guide) == 1 and guide[0].id == "ahp-guide"
        chen = next(p for p in personas if p.id == "ava-chen")
        assert chen.name.startswith("Cybersecurity Strategist")

    def test_parse_personas_reply(self):
        reply = """Cybersecurity Strategist, Dr. Ava Chen:
Background: Ph.D. in Cybersecurity and over 15 years of experience.
Personality/Preferences: Detail-oriented and analytical.

Physical Security Expert, Lt. Col. John Abrams (Retd.):
Background: Military background and corporate physical security.
Personality/Preferences: Practical and no-nonsense.
"""
        personas = parse_personas_reply(reply, 2)
        assert [p.id for p in personas] == ["ava-chen", "john-abrams"]
        assert "15 years" in personas[0].instructions

    def test_wrong_count_is_violation(self):
        with pytest.raises(ParseViolation):
            parse_personas_reply("Strategist, A:\nBackground: b.\n", 2)

    def test_bad_file(self, tmp_path):
        p = tmp_path / "p.json"
        p.write_text("{}")
        with pytest.raises(DataError):
            load_personas(p)
