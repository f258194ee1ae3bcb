"""Exception hierarchy shared across the package.

Split along the CLI exit-code contract: usage problems (exit 1), data and
validation problems (exit 2), backend/transport problems (exit 3).
"""

from __future__ import annotations


class PanelError(Exception):
    """Base class for every error raised by this package."""


class UsageError(PanelError):
    """Bad invocation: unknown flag, missing argument, malformed config."""


class DataError(PanelError):
    """Invalid input data: broken matrix file, bad tree, bad session."""


class UnsupportedOrderError(DataError):
    """Matrix order outside the supported random-index table (2..10)."""


class BackendError(PanelError):
    """Failure while talking to an expert backend."""


class TransportError(BackendError):
    """Transient transport failure on the live backend; retriable."""


class CredentialError(BackendError):
    """Live backend selected but the configured credential is absent."""


class ReplayDivergence(BackendError):
    """A replayed prompt does not match the recorded transcript. Fatal."""


class ContextBudgetExceeded(BackendError):
    """Sending this message would exceed the conversation token budget.

    Raised before anything is sent; the caller is expected to rotate the
    conversation and retry.
    """

    def __init__(self, have: int, incoming: int, budget: int):
        self.have = have
        self.incoming = incoming
        self.budget = budget
        super().__init__(
            f"context budget exceeded: {have} tokens held + {incoming} incoming "
            f"> budget {budget}"
        )


class ParseViolation(DataError):
    """A structured reply failed to parse. Usually repairable via a reminder.

    ``rule`` is a short machine-readable name of the violated rule, e.g.
    ``count mismatch`` or ``reciprocity``; ``detail`` is a human sentence.
    """

    def __init__(self, rule: str, detail: str, repairable: bool = True):
        self.rule = rule
        self.detail = detail
        self.repairable = repairable
        super().__init__(f"{rule}: {detail}")


class RepairExhausted(BackendError):
    """An expert kept producing malformed replies past the repair budget."""

    def __init__(self, expert_id: str, stage: str, last_violation: ParseViolation):
        self.expert_id = expert_id
        self.stage = stage
        self.last_violation = last_violation
        super().__init__(
            f"expert {expert_id!r} failed stage {stage!r} after repair budget: "
            f"{last_violation}"
        )


class StageAbort(PanelError):
    """A pipeline stage aborted; the session on disk is left untouched."""
