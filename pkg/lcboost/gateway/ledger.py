#!/usr/bin/env python3
"""
Append-only per-call token ledger.

Totals are kept alongside the entries and always equal their sum. Appends
are serialized with a lock so one ledger may be shared by concurrent callers.
"""

import threading
from dataclasses import asdict, dataclass
from decimal import Decimal
from typing import Any, Dict, List, Optional, Tuple

from lcboost.constants import DEFAULT_TOKEN_CALIBRATION

MILLION = Decimal(1_000_000)
USD_PRECISION = Decimal('0.000001')


@dataclass(frozen=True)
class LedgerEntry:
    call_id: int
    role: str
    prompt_tokens: int
    response_tokens: int


class CostLedger:
    """Ordered record of (call id, role, prompt tokens, response tokens)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: List[LedgerEntry] = []
        self._prompt_total = 0
        self._response_total = 0

    def record(self, role: str, prompt_tokens: int, response_tokens: int) -> LedgerEntry:
        if prompt_tokens < 0 or response_tokens < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            entry = LedgerEntry(call_id=len(self._entries) + 1, role=role,
                                prompt_tokens=prompt_tokens, response_tokens=response_tokens)
            self._entries.append(entry)
            self._prompt_total += prompt_tokens
            self._response_total += response_tokens
            return entry

    @property
    def entries(self) -> Tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    @property
    def prompt_tokens(self) -> int:
        return self._prompt_total

    @property
    def response_tokens(self) -> int:
        return self._response_total

    @property
    def total_tokens(self) -> int:
        return self._prompt_total + self._response_total

    def __len__(self) -> int:
        return len(self._entries)

    def by_role(self) -> Dict[str, Dict[str, int]]:
        """Call count and token totals per role tag."""
        summary: Dict[str, Dict[str, int]] = {}
        for entry in self.entries:
            row = summary.setdefault(entry.role, {'calls': 0, 'prompt_tokens': 0, 'response_tokens': 0})
            row['calls'] += 1
            row['prompt_tokens'] += entry.prompt_tokens
            row['response_tokens'] += entry.response_tokens
        return summary

    def cost(self, cost_per_1M_input: Decimal, cost_per_1M_output: Decimal,
             calibration: float = DEFAULT_TOKEN_CALIBRATION) -> Decimal:
        """
        Price of all calls.

        Local token counts are scaled by `calibration` to approximate backend
        tokens before pricing.
        """
        scale = Decimal(str(calibration))
        return ((Decimal(self._prompt_total) * scale * Decimal(cost_per_1M_input)
                 + Decimal(self._response_total) * scale * Decimal(cost_per_1M_output)) / MILLION)

    def snapshot(self, profile: Optional[Any] = None,
                 calibration: float = DEFAULT_TOKEN_CALIBRATION) -> Dict[str, Any]:
        """
        Serializable copy of the ledger.

        With a BackendProfile, the snapshot also carries the USD cost.
        """
        with self._lock:
            entries = [asdict(e) for e in self._entries]
            data = {
                'entries': entries,
                'calls': len(entries),
                'prompt_tokens': self._prompt_total,
                'response_tokens': self._response_total,
                'total_tokens': self._prompt_total + self._response_total,
            }
        if profile is not None:
            cost = self.cost(profile.cost_per_1M_input, profile.cost_per_1M_output, calibration)
            data['cost_usd'] = str(cost.quantize(USD_PRECISION))
        return data
