"""OpenAI-compatible ``/chat/completions`` transport."""
from __future__ import annotations

import os
from typing import Any

import httpx

from .base import Completion, DecodingParams


class ProtocolError(RuntimeError):
    pass


class ChatCompletionsTransport:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(api_key_env) if api_key_env else None
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers

    def close(self) -> None:
        self._client.close()

    def request_body(self, prompt: str, params: DecodingParams) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.logprobs:
            body["logprobs"] = True
        return body

    def send(self, prompt: str, params: DecodingParams) -> Completion:
        response = self._client.post(self.url, json=self.request_body(prompt, params), headers=self._headers)
        response.raise_for_status()
        return parse_response(response.json())


def parse_response(data: dict[str, Any]) -> Completion:
    try:
        choice = data["choices"][0]
        text = choice["message"].get("content") or ""
    except (KeyError, IndexError, TypeError, AttributeError):
        raise ProtocolError("response has no choices[0].message") from None

    logprobs = None
    content = (choice.get("logprobs") or {}).get("content")
    if content:
        logprobs = [(item["token"], float(item["logprob"])) for item in content]

    usage = data.get("usage") or {}
    prompt_tokens = int(usage.get("prompt_tokens") or 0)
    if logprobs is not None:
        # keep the Completion invariant even when a server's usage is off by one
        completion_tokens = len(logprobs)
    else:
        completion_tokens = int(usage.get("completion_tokens") or 0)
    return Completion(
        text=text,
        token_logprobs=logprobs,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
    )
