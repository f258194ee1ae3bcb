"""Token and dollar accounting for panel conversations.

Costs are computed in Decimal from integer token counts so cent rounding is
exact: 4350 tokens at a blended 0.10/1k is 0.435, which rounds half-up to
0.44 rather than drifting through binary floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from ..errors import DataError

CENT = Decimal("0.01")


@dataclass(frozen=True)
class Pricing:
    input_per_1k: Decimal
    output_per_1k: Decimal
    blended_per_1k: Decimal

    @classmethod
    def from_strings(cls, input_per_1k, output_per_1k, blended_per_1k) -> "Pricing":
        try:
            return cls(
                input_per_1k=Decimal(str(input_per_1k)),
                output_per_1k=Decimal(str(output_per_1k)),
                blended_per_1k=Decimal(str(blended_per_1k)),
            )
        except ArithmeticError as exc:
            raise DataError(f"bad pricing value: {exc}") from exc


@dataclass(frozen=True)
class CostReport:
    per_persona: dict        # persona id -> {words, tokens, cost}
    panel_total: str         # sum of per-expert rounded costs
    guide_total: str
    grand_total: str
    headline_total: int      # grand total rounded up to whole dollars
    blended_per_1k: str
    tokens_per_word: float

    def to_dict(self) -> dict:
        return {
            "per_persona": self.per_persona,
            "panel_total": self.panel_total,
            "guide_total": self.guide_total,
            "grand_total": self.grand_total,
            "headline_total": self.headline_total,
            "blended_per_1k": self.blended_per_1k,
            "tokens_per_word": self.tokens_per_word,
        }


def _cents(amount: Decimal) -> Decimal:
    return amount.quantize(CENT, rounding=ROUND_HALF_UP)


def estimate_cost(conversations, pricing: Pricing, roles: dict | None = None,
                  tokens_per_word: float = 0.75) -> CostReport:
    """Price every persona's conversations at the blended per-1k-token rate.

    Per-persona cost is rounded to cents first; the panel total is the sum
    of the rounded per-expert costs. Personas with role "guide" (per
    ``roles``) are accounted separately from the expert panel.
    """
    if pricing is None:
        raise DataError("pricing is required to estimate costs")
    roles = roles or {}
    tokens = {}
    words = {}
    for conv in conversations:
        t = sum(m.token_estimate for m in conv.messages)
        w = sum(len(m.text.split()) for m in conv.messages)
        tokens[conv.persona_id] = tokens.get(conv.persona_id, 0) + t
        words[conv.persona_id] = words.get(conv.persona_id, 0) + w

    per_persona = {}
    panel = Decimal("0")
    guide = Decimal("0")
    for pid in sorted(tokens):
        cost = _cents(Decimal(tokens[pid]) * pricing.blended_per_1k / Decimal(1000))
        per_persona[pid] = {
            "words": words[pid],
            "tokens": tokens[pid],
            "cost": str(cost),
            "role": roles.get(pid, "expert"),
        }
        if roles.get(pid) == "guide":
            guide += cost
        else:
            panel += cost
    grand = panel + guide
    headline = int(math.ceil(grand)) if grand > 0 else 0
    return CostReport(
        per_persona=per_persona,
        panel_total=str(_cents(panel)),
        guide_total=str(_cents(guide)),
        grand_total=str(_cents(grand)),
        headline_total=headline,
        blended_per_1k=str(pricing.blended_per_1k),
        tokens_per_word=tokens_per_word,
    )
