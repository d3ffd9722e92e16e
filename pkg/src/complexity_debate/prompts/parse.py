from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from ..backends.base import Completion, ConfidenceUnavailable, logit_confidence
from ..taxonomy import BY_TOKEN, DEFAULT_TABLE, AliasTable, ComplexityClass, UnknownLabel

INITIAL = "initial"
UPDATED = "updated"

TAIL_WINDOW = 200
FALLBACK_TOKENS = 10

_COMPLEXITY_LINE = re.compile(r"^[ \t>*#_-]*(?:time[ \t]+)?complexity[ \t*_]*:[ \t*_]*(?P<payload>.*?)[ \t]*$", re.I | re.M)
_CONFIDENCE_LINE = re.compile(r"^[ \t>*#_-]*confidence[ \t*_]*:[ \t*_]*(?P<payload>.*?)[ \t]*$", re.I | re.M)
_REASONING_HEAD = re.compile(r"^[ \t>*#_-]*reasoning[ \t*_]*:[ \t*_]*", re.I | re.M)
_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")


@dataclass
class Verdict:
    backend: str
    expert_class: ComplexityClass
    predicted: ComplexityClass | None
    opinion: str
    phase: str = INITIAL
    logit_conf: float | None = None
    self_conf: float | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    raw: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.predicted is not None

    def as_updated(self, note: str | None = None) -> Verdict:
        notes = [*self.notes, note] if note else list(self.notes)
        return replace(self, phase=UPDATED, notes=notes)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "expert_class": self.expert_class.token,
            "predicted": None if self.predicted is None else self.predicted.token,
            "opinion": self.opinion,
            "phase": self.phase,
            "logit_conf": self.logit_conf,
            "self_conf": self.self_conf,
            "usage": {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens},
            "raw": self.raw,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, data: dict) -> Verdict:
        usage = data.get("usage") or {}
        predicted = data.get("predicted")
        return cls(
            backend=data["backend"],
            expert_class=BY_TOKEN[data["expert_class"]],
            predicted=None if predicted is None else BY_TOKEN[predicted],
            opinion=data.get("opinion", ""),
            phase=data.get("phase", INITIAL),
            logit_conf=data.get("logit_conf"),
            self_conf=data.get("self_conf"),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            raw=data.get("raw", ""),
            notes=list(data.get("notes", [])),
        )


def failed_verdict(backend: str, expert_class: ComplexityClass, phase: str, reason: str) -> Verdict:
    return Verdict(backend=backend, expert_class=expert_class, predicted=None, opinion="", phase=phase, notes=[reason])


def _single_class(hits: list[tuple[int, int, ComplexityClass]]) -> tuple[int, int, ComplexityClass] | None:
    """The last hit, provided every hit names the same class."""
    if not hits or len({c for _, _, c in hits}) != 1:
        return None
    return hits[-1]


def locate_label(text: str, table: AliasTable = DEFAULT_TABLE) -> tuple[ComplexityClass, int, int] | None:
    """Find the predicted class and its character span in a completion."""
    match = _COMPLEXITY_LINE.search(text)
    if match is not None:
        payload = match.group("payload")
        start = match.start("payload")
        try:
            return table.lookup(payload), start, start + len(payload)
        except UnknownLabel:
            pass
        found = _single_class(table.find_all(payload))
        if found is None:
            return None
        s, e, cls = found
        return cls, start + s, start + e

    offset = max(0, len(text) - TAIL_WINDOW)
    found = _single_class(table.find_all(text[offset:]))
    if found is None:
        return None
    s, e, cls = found
    return cls, offset + s, offset + e


def token_span(completion: Completion, start: int, end: int) -> range | None:
    """Indices of tokens overlapping text[start:end]; None when tokens do not spell the text."""
    tokens = completion.token_logprobs or []
    if "".join(t for t, _ in tokens) != completion.text:
        return None
    first = last = None
    pos = 0
    for i, (tok, _) in enumerate(tokens):
        nxt = pos + len(tok)
        if nxt > start and pos < end:
            if first is None:
                first = i
            last = i
        pos = nxt
    if first is None:
        return None
    return range(first, last + 1)


def _self_confidence(text: str, notes: list[str]) -> float | None:
    match = _CONFIDENCE_LINE.search(text)
    if match is None:
        return None
    number = _NUMBER.search(match.group("payload"))
    if number is None:
        notes.append("self-confidence unparseable; dropped")
        return None
    value = float(number.group(0))
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        notes.append(f"self-confidence {number.group(0)} outside [0, 1]; dropped")
        return None
    return value


def _opinion(text: str) -> str:
    match = _REASONING_HEAD.search(text)
    if match is None:
        return text.strip()
    return text[match.end():].strip()


def parse_verdict(
    completion: Completion,
    backend: str,
    expert_class: ComplexityClass,
    phase: str = INITIAL,
    table: AliasTable = DEFAULT_TABLE,
) -> Verdict:
    """Turn a completion into a Verdict. Never raises on arbitrary text.

    The label comes from the ``COMPLEXITY:`` line; without one, the last 200
    characters are scanned and accepted only if every alias found there names
    the same class. Anything else is an invalid verdict with the raw text kept.
    """
    text = completion.text or ""
    notes: list[str] = []
    located = locate_label(text, table)
    predicted = located[0] if located else None
    if predicted is None:
        notes.append("no unambiguous label found")

    logit_conf = None
    if predicted is not None and completion.token_logprobs:
        span = token_span(completion, located[1], located[2])
        if span is None:
            span = range(max(0, len(completion.token_logprobs) - FALLBACK_TOKENS), len(completion.token_logprobs))
            notes.append("logit span fallback: mean over final completion tokens")
        try:
            logit_conf = logit_confidence(completion, span)
        except (ConfidenceUnavailable, ValueError) as exc:
            notes.append(f"logit confidence unavailable: {exc}")

    return Verdict(
        backend=backend,
        expert_class=expert_class,
        predicted=predicted,
        opinion=_opinion(text),
        phase=phase,
        logit_conf=logit_conf,
        self_conf=_self_confidence(text, notes),
        prompt_tokens=completion.prompt_tokens,
        completion_tokens=completion.completion_tokens,
        raw=text,
        notes=notes,
    )
