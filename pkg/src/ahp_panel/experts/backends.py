"""Conversation state and the three expert backends: live, replay, scripted.

A `Conversation` is an append-only, strictly alternating exchange with one
persona. Backends implement `exchange(persona, conversation, prompt)` and
return the reply text (plus exact token counts when they have them);
`converse` owns budget checking and bookkeeping.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import (
    BackendError,
    ContextBudgetExceeded,
    CredentialError,
    DataError,
    ReplayDivergence,
    TransportError,
)

AUTHOR_USER = "user"
AUTHOR_EXPERT = "expert"

DEFAULT_CONTEXT_BUDGET = 8192
DEFAULT_TOKENS_PER_WORD = 0.75


def estimate_tokens(text: str, tokens_per_word: float = DEFAULT_TOKENS_PER_WORD) -> int:
    """Word-count token estimate, used when a backend reports no exact counts."""
    words = len(text.split())
    return math.ceil(words * tokens_per_word) if words else 0


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Message:
    author: str
    text: str
    token_estimate: int

    def to_dict(self) -> dict:
        return {"author": self.author, "text": self.text, "token_estimate": self.token_estimate}


@dataclass(frozen=True)
class Conversation:
    persona_id: str
    messages: tuple = ()
    pending_carryover: str = ""

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        expected = AUTHOR_USER
        for m in self.messages:
            if m.author != expected:
                raise DataError(
                    f"conversation with {self.persona_id!r} must alternate user/expert "
                    f"turns starting with user")
            expected = AUTHOR_EXPERT if expected == AUTHOR_USER else AUTHOR_USER

    @property
    def token_count(self) -> int:
        return sum(m.token_estimate for m in self.messages)

    def to_dict(self) -> dict:
        return {
            "persona_id": self.persona_id,
            "messages": [m.to_dict() for m in self.messages],
            "pending_carryover": self.pending_carryover,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Conversation":
        return cls(
            persona_id=d["persona_id"],
            messages=tuple(
                Message(m["author"], m["text"], int(m["token_estimate"]))
                for m in d["messages"]
            ),
            pending_carryover=d.get("pending_carryover", ""),
        )


def rotate_conversation(conversation: Conversation, carryover: str) -> Conversation:
    """Start a fresh conversation for the same persona.

    The caller archives the old conversation; the returned one is empty and
    carries the decision summary, which is prepended to the next message so
    turns keep alternating.
    """
    return Conversation(persona_id=conversation.persona_id, pending_carryover=carryover.strip())


def converse(backend, persona, conversation: Conversation, message: str, *,
             context_budget: int = DEFAULT_CONTEXT_BUDGET,
             tokens_per_word: float = DEFAULT_TOKENS_PER_WORD):
    """Send one message and append the reply; returns (reply, conversation).

    Any pending carryover is folded into this message. If the estimated
    cumulative token count would exceed the context budget the exchange is
    refused *before* sending and the caller must rotate the conversation.
    """
    if conversation.pending_carryover:
        message = conversation.pending_carryover + "\n\n" + message
        conversation = replace(conversation, pending_carryover="")
    incoming = estimate_tokens(message, tokens_per_word)
    if conversation.token_count + incoming > context_budget:
        raise ContextBudgetExceeded(conversation.token_count, incoming, context_budget)
    result = backend.exchange(persona, conversation, message)
    reply, prompt_tokens, reply_tokens = result
    if prompt_tokens is None:
        prompt_tokens = incoming
    if reply_tokens is None:
        reply_tokens = estimate_tokens(reply, tokens_per_word)
    updated = replace(
        conversation,
        messages=conversation.messages
        + (Message(AUTHOR_USER, message, prompt_tokens),
           Message(AUTHOR_EXPERT, reply, reply_tokens)),
    )
    return reply, updated


class ScriptedBackend:
    """Deterministic rule table: prompt pattern -> literal reply or handler.

    Rules are evaluated in order; the first rule whose regex matches the
    prompt (and whose optional persona filter matches) answers. Handlers are
    pure functions of (data, persona, conversation, prompt, match), so runs
    are bit-reproducible.
    """

    kind = "scripted"

    def __init__(self, rules, data=None, handlers=None):
        self.rules = []
        for rule in rules:
            compiled = re.compile(rule["match"], re.S)
            self.rules.append({**rule, "_re": compiled})
        self.data = data or {}
        self.handlers = dict(handlers or {})

    @classmethod
    def from_file(cls, path, handlers=None) -> "ScriptedBackend":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read script file {path}: {exc}") from exc
        return cls(doc.get("rules", []), data=doc.get("data", {}), handlers=handlers)

    def exchange(self, persona, conversation, prompt):
        for rule in self.rules:
            if rule.get("persona") and persona.id != rule["persona"]:
                continue
            m = rule["_re"].search(prompt)
            if not m:
                continue
            if "reply" in rule:
                return rule["reply"], None, None
            handler = self.handlers.get(rule.get("handler"))
            if handler is None:
                raise BackendError(
                    f"script rule {rule['match']!r} names unknown handler "
                    f"{rule.get('handler')!r}")
            return handler(self.data, persona, conversation, prompt, m), None, None
        raise BackendError(
            f"scripted backend has no rule for prompt to {persona.id!r}: "
            f"{prompt[:80]!r}...")


class ReplayBackend:
    """Replays a recorded transcript; any prompt divergence is fatal.

    The transcript is a JSON array of exchanges carrying the prompt, its
    hash, the reply, and the recorded token counts. Lookup is by
    (persona id, prompt hash); repeated identical prompts replay in order.
    """

    kind = "replay"

    def __init__(self, transcript):
        self._queues = {}
        for entry in transcript:
            key = (entry["persona_id"], entry["prompt_hash"])
            self._queues.setdefault(key, []).append(entry)

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        try:
            transcript = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read transcript {path}: {exc}") from exc
        return cls(transcript)

    def exchange(self, persona, conversation, prompt):
        key = (persona.id, prompt_hash(prompt))
        queue = self._queues.get(key)
        if not queue:
            raise ReplayDivergence(
                f"no recorded reply for this prompt to {persona.id!r} "
                f"(prompt starts: {prompt[:80]!r})")
        entry = queue.pop(0)
        return entry["reply"], entry.get("prompt_tokens"), entry.get("reply_tokens")


class RecordingBackend:
    """Wraps another backend and captures a replayable transcript."""

    def __init__(self, inner):
        self.inner = inner
        self.kind = inner.kind
        self.transcript = []

    def exchange(self, persona, conversation, prompt):
        reply, prompt_tokens, reply_tokens = self.inner.exchange(persona, conversation, prompt)
        self.transcript.append({
            "persona_id": persona.id,
            "prompt_hash": prompt_hash(prompt),
            "prompt": prompt,
            "reply": reply,
            "prompt_tokens": prompt_tokens if prompt_tokens is not None
            else estimate_tokens(prompt),
            "reply_tokens": reply_tokens if reply_tokens is not None
            else estimate_tokens(reply),
        })
        return reply, prompt_tokens, reply_tokens

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.transcript, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")


class LiveBackend:
    """HTTPS chat-completion backend.

    Sends the persona instructions as the system message followed by the
    conversation turns; expects a single assistant message back. Transient
    transport failures are retried with exponential backoff; malformed model
    output is *not* a transport problem and flows to the repair path instead.
    """

    kind = "live"

    RETRIABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(self, endpoint: str, model: str, api_key_env: str,
                 timeout: float = 60.0, max_retries: int = 3, backoff: float = 1.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        key = os.environ.get(api_key_env or "", "")
        if not key:
            raise CredentialError(
                f"live backend needs a credential in ${api_key_env or '<unset>'}")
        self._key = key

    def exchange(self, persona, conversation, prompt):
        messages = [{"role": "system", "content": persona.instructions}]
        for m in conversation.messages:
            role = "user" if m.author == AUTHOR_USER else "assistant"
            messages.append({"role": role, "content": m.text})
        messages.append({"role": "user", "content": prompt})
        payload = {"model": self.model, "messages": messages}

        import requests

        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    self.endpoint,
                    json=payload,
                    headers={"Authorization": f"Bearer {self._key}"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = TransportError(f"transport failure: {exc}")
                continue
            if resp.status_code in self.RETRIABLE_STATUS:
                last_error = TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                doc = resp.json()
                choice = doc["choices"][0]["message"]
                reply = choice["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise BackendError(f"malformed chat-completion response: {exc}")
            usage = doc.get("usage", {})
            return reply, usage.get("prompt_tokens"), usage.get("completion_tokens")
        raise last_error


def make_backend(kind: str, settings: dict, handlers=None):
    """Build a backend from config settings; see each class for the fields."""
    if kind == "scripted":
        path = settings.get("script")
        if not path:
            raise DataError("scripted backend needs a 'script' file path")
        return ScriptedBackend.from_file(path, handlers=handlers)
    if kind == "replay":
        path = settings.get("transcript")
        if not path:
            raise DataError("replay backend needs a 'transcript' file path")
        return ReplayBackend.from_file(path)
    if kind == "live":
        for field_name in ("endpoint", "model", "api_key_env"):
            if not settings.get(field_name):
                raise DataError(f"live backend needs {field_name!r} in config")
        return LiveBackend(
            endpoint=settings["endpoint"],
            model=settings["model"],
            api_key_env=settings["api_key_env"],
            timeout=float(settings.get("timeout", 60.0)),
            max_retries=int(settings.get("max_retries", 3)),
            backoff=float(settings.get("backoff", 1.0)),
        )
    raise DataError(f"unknown backend kind {kind!r}")
