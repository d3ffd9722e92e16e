from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol, Sequence

log = logging.getLogger(__name__)

CONFIDENCE_FLOOR = 1e-6


class TransportError(RuntimeError):
    """A backend could not produce a completion after all retries."""

    def __init__(self, backend: str, message: str) -> None:
        super().__init__(f"backend {backend!r}: {message}")
        self.backend = backend


class ConfidenceUnavailable(LookupError):
    """The completion carries no per-token log-probabilities."""


@dataclass(frozen=True)
class BackendId:
    name: str
    endpoint_ref: str = ""

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_tokens: int = 512
    logprobs: bool = True

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class Completion:
    text: str
    token_logprobs: list[tuple[str, float]] | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    from_cache: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if self.token_logprobs is not None:
            self.token_logprobs = [(str(t), float(lp)) for t, lp in self.token_logprobs]
            if self.completion_tokens != len(self.token_logprobs):
                raise ValueError(
                    f"completion_tokens={self.completion_tokens} but {len(self.token_logprobs)} logprobs"
                )

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "token_logprobs": None if self.token_logprobs is None else [list(p) for p in self.token_logprobs],
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }

    @classmethod
    def from_json(cls, data: dict, from_cache: bool = False) -> Completion:
        lps = data.get("token_logprobs")
        return cls(
            text=data["text"],
            token_logprobs=None if lps is None else [(t, lp) for t, lp in lps],
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            from_cache=from_cache,
        )


class Transport(Protocol):
    def send(self, prompt: str, params: DecodingParams) -> Completion: ...


def logit_confidence(completion: Completion, answer_span: range | Sequence[int]) -> float:
    """exp(mean log-probability) over the answer tokens, floored at 1e-6."""
    if completion.token_logprobs is None:
        raise ConfidenceUnavailable("completion has no token log-probabilities")
    indices = list(answer_span)
    if not indices:
        raise ValueError("answer span is empty")
    n = len(completion.token_logprobs)
    if any(i < 0 or i >= n for i in indices):
        raise ValueError(f"answer span {indices[0]}..{indices[-1]} outside 0..{n - 1}")
    mean = math.fsum(completion.token_logprobs[i][1] for i in indices) / len(indices)
    return max(CONFIDENCE_FLOOR, min(1.0, math.exp(mean)))


class Backend:
    """A named model endpoint with retries and an optional response cache."""

    def __init__(
        self,
        ident: BackendId | str,
        transport: Transport,
        cache=None,
        max_attempts: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.id = ident if isinstance(ident, BackendId) else BackendId(ident)
        self.transport = transport
        self.cache = cache
        self.max_attempts = max(1, max_attempts)
        self.backoff = backoff
        self._sleep = sleep

    @property
    def name(self) -> str:
        return self.id.name

    def complete(self, prompt: str, params: DecodingParams | None = None) -> Completion:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        params = params or DecodingParams()
        if self.cache is not None:
            hit = self.cache.get(self.name, prompt, params)
            if hit is not None:
                return hit
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                completion = self.transport.send(prompt, params)
                break
            except Exception as exc:  # transports raise whatever their client raises
                last = exc
                log.warning("backend %s attempt %d/%d failed: %s", self.name, attempt + 1, self.max_attempts, exc)
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff * (2**attempt))
        else:
            raise TransportError(self.name, f"gave up after {self.max_attempts} attempts: {last}") from last
        if self.cache is not None:
            self.cache.put(self.name, prompt, params, completion)
        return completion


def complete(backend: Backend, prompt: str, params: DecodingParams | None = None) -> Completion:
    return backend.complete(prompt, params)
