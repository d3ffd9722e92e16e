"""Scripted test-double transports.

A responder maps ``(prompt, params)`` to a reply, which may be a plain string,
a :class:`Completion`, or a dict with any of::

    text               reply text (required unless "fail")
    logprobs           [[token, logprob], ...]; tokens must concatenate to text
    token_logprob      shorthand: tokenize text and give every token this logprob
    prompt_tokens      default: whitespace word count of the prompt
    completion_tokens  default: number of tokens in the reply
    fail               true -> raise ScriptedFailure (simulates a timeout)

Rule files (JSON) are ``{"rules": [{"contains": [...], "reply": ...}], "default": ...}``;
the first rule whose substrings all occur in the prompt wins.
"""
from __future__ import annotations

import importlib
import json
import re
import threading
from pathlib import Path
from typing import Any, Callable, Mapping, Union

from .base import Completion, DecodingParams

Reply = Union[str, Completion, Mapping[str, Any]]
Responder = Callable[[str, DecodingParams], Reply]

_PIECE = re.compile(r"\s+|\S+")


class ScriptedFailure(TimeoutError):
    pass


def tokenize(text: str) -> list[str]:
    """Whitespace-run / non-whitespace-run pieces; they concatenate back to ``text``."""
    return _PIECE.findall(text)


def build_completion(reply: Reply, prompt: str) -> Completion:
    if isinstance(reply, Completion):
        return reply
    if isinstance(reply, str):
        reply = {"text": reply}
    if reply.get("fail"):
        raise ScriptedFailure(reply.get("text") or "scripted failure")
    text = reply["text"]
    logprobs = reply.get("logprobs")
    if logprobs is None and reply.get("token_logprob") is not None:
        lp = float(reply["token_logprob"])
        logprobs = [(tok, lp) for tok in tokenize(text)]
    if logprobs is not None:
        logprobs = [(t, float(v)) for t, v in logprobs]
        n_completion = len(logprobs)
    else:
        n_completion = int(reply.get("completion_tokens", len(tokenize(text))))
    return Completion(
        text=text,
        token_logprobs=logprobs,
        prompt_tokens=int(reply.get("prompt_tokens", len(prompt.split()))),
        completion_tokens=n_completion,
    )


class ScriptedTransport:
    """Wraps a responder; counts calls so tests can assert on transport traffic."""

    def __init__(self, responder: Responder | Reply) -> None:
        if callable(responder):
            self._responder = responder
        else:
            fixed = responder
            self._responder = lambda prompt, params: fixed
        self.calls = 0
        self.emitted_prompt_tokens = 0
        self.emitted_completion_tokens = 0
        self._lock = threading.Lock()

    def send(self, prompt: str, params: DecodingParams) -> Completion:
        with self._lock:
            self.calls += 1
        completion = build_completion(self._responder(prompt, params), prompt)
        with self._lock:
            self.emitted_prompt_tokens += completion.prompt_tokens
            self.emitted_completion_tokens += completion.completion_tokens
        return completion


def rules_responder(script: Mapping[str, Any]) -> Responder:
    rules = list(script.get("rules", []))
    default = script.get("default")

    def respond(prompt: str, params: DecodingParams) -> Reply:
        for rule in rules:
            if all(s in prompt for s in rule.get("contains", [])):
                return rule["reply"]
        if default is None:
            raise ScriptedFailure("no scripted rule matched and no default reply")
        return default

    return respond


def load_rules(path: str | Path) -> Responder:
    return rules_responder(json.loads(Path(path).read_text(encoding="utf-8")))


def load_entrypoint(spec: str, backend: str, options: Mapping[str, Any] | None = None) -> Responder:
    """Resolve ``"package.module:factory"``; the factory is called as ``factory(backend, **options)``."""
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ValueError(f"entrypoint {spec!r} must look like 'module:attribute'")
    factory = getattr(importlib.import_module(module_name), attr)
    return factory(backend, **dict(options or {}))
