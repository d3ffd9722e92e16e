from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass, field

from .base import Completion


@dataclass
class TokenCounts:
    prompt: int = 0
    completion: int = 0
    calls: int = 0
    cache_hits: int = 0

    def add(self, completion: Completion) -> None:
        if completion.from_cache:
            self.cache_hits += 1
            return
        self.prompt += completion.prompt_tokens
        self.completion += completion.completion_tokens
        self.calls += 1

    def to_json(self) -> dict:
        return {
            "prompt_tokens": self.prompt,
            "completion_tokens": self.completion,
            "calls": self.calls,
            "cache_hits": self.cache_hits,
        }


@dataclass
class TokenLedger:
    """Token usage by backend and by phase. Cache hits count as hits, never as tokens."""

    total: TokenCounts = field(default_factory=TokenCounts)
    by_backend: dict[str, TokenCounts] = field(default_factory=lambda: defaultdict(TokenCounts))
    by_phase: dict[str, TokenCounts] = field(default_factory=lambda: defaultdict(TokenCounts))

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def account(self, completion: Completion, backend: str, phase: str) -> None:
        with self._lock:
            self.total.add(completion)
            self.by_backend[backend].add(completion)
            self.by_phase[phase].add(completion)

    def to_json(self) -> dict:
        return {
            "total": self.total.to_json(),
            "by_backend": {k: self.by_backend[k].to_json() for k in sorted(self.by_backend)},
            "by_phase": {k: self.by_phase[k].to_json() for k in sorted(self.by_phase)},
        }


def account_tokens(ledger: TokenLedger, completion: Completion, backend: str = "-", phase: str = "-") -> TokenLedger:
    ledger.account(completion, backend, phase)
    return ledger
