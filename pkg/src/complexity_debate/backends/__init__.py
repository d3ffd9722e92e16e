from .base import (
    CONFIDENCE_FLOOR,
    Backend,
    BackendId,
    Completion,
    ConfidenceUnavailable,
    DecodingParams,
    Transport,
    TransportError,
    complete,
    logit_confidence,
)
from .cache import ResponseCache, cache_key
from .ledger import TokenCounts, TokenLedger, account_tokens
from .scripted import ScriptedFailure, ScriptedTransport, build_completion, rules_responder, tokenize

__all__ = [
    "CONFIDENCE_FLOOR",
    "Backend",
    "BackendId",
    "Completion",
    "ConfidenceUnavailable",
    "DecodingParams",
    "ResponseCache",
    "ScriptedFailure",
    "ScriptedTransport",
    "TokenCounts",
    "TokenLedger",
    "Transport",
    "TransportError",
    "account_tokens",
    "build_completion",
    "cache_key",
    "complete",
    "logit_confidence",
    "rules_responder",
    "tokenize",
]
