"""The ask-parse-remind loop for structured elicitation.

A malformed reply triggers a reminder prompt naming the violated rule; after
``max_repairs`` reminders the expert is failed for the stage and the
conversation (including the malformed replies) is preserved for the session.
"""

from __future__ import annotations

from ..errors import ParseViolation, RepairExhausted
from .backends import DEFAULT_CONTEXT_BUDGET, DEFAULT_TOKENS_PER_WORD, converse
from .prompts import PromptTemplate, render_prompt

DEFAULT_MAX_REPAIRS = 2

_FALLBACK_REMINDER = PromptTemplate(
    "repair_reminder",
    "Your previous reply could not be used: {items}.\n\nPlease provide a corrected reply.",
)


def ask_structured(backend, persona, conversation, prompt: str, parser, *,
                   stage: str = "?",
                   reminder_template: PromptTemplate | None = None,
                   max_repairs: int = DEFAULT_MAX_REPAIRS,
                   context_budget: int = DEFAULT_CONTEXT_BUDGET,
                   tokens_per_word: float = DEFAULT_TOKENS_PER_WORD):
    """Send ``prompt``, parse the reply, repairing up to ``max_repairs`` times.

    Returns ``(parsed_value, conversation, repair_log)`` where the log holds
    one entry per reminder that was needed. Raises :class:`RepairExhausted`
    (with the conversation attached) once the budget is spent.
    """
    reminder_template = reminder_template or _FALLBACK_REMINDER
    repair_log = []
    message = prompt
    for attempt in range(max_repairs + 1):
        reply, conversation = converse(
            backend, persona, conversation, message,
            context_budget=context_budget, tokens_per_word=tokens_per_word)
        try:
            return parser(reply), conversation, repair_log
        except ParseViolation as violation:
            if not violation.repairable or attempt >= max_repairs:
                exhausted = RepairExhausted(persona.id, stage, violation)
                exhausted.conversation = conversation
                raise exhausted from violation
            repair_log.append({"rule": violation.rule, "detail": violation.detail})
            message = render_prompt(reminder_template, {"items": str(violation)})
    raise AssertionError("unreachable")
