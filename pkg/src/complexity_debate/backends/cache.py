"""Append-only response cache.

File layout: UTF-8 JSON lines, one record per completion::

    {"backend": <name>, "completion": {<Completion.to_json()>}, "key": <hex>, "params": <hex>, "prompt": <hex>}

``prompt`` is sha256 of the exact prompt text, ``params`` is sha256 of the
canonical JSON of the decoding parameters, and ``key`` is sha256 of
``backend + "\\n" + prompt + "\\n" + params``. Keys are serialized with sorted
keys and no extra whitespace. A later record for an existing key wins, so the
file can be replayed top to bottom. A truncated final line (crash mid-write)
is ignored on load.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from pathlib import Path

from .base import Completion, DecodingParams

log = logging.getLogger(__name__)


def cache_key(backend: str, prompt: str, params: DecodingParams) -> tuple[str, str, str]:
    prompt_digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    params_digest = params.digest()
    key = hashlib.sha256(f"{backend}\n{prompt_digest}\n{params_digest}".encode("utf-8")).hexdigest()
    return key, prompt_digest, params_digest


class ResponseCache:
    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    self._entries[record["key"]] = record["completion"]
                except (json.JSONDecodeError, KeyError):
                    log.warning("%s:%d: skipping unreadable cache record", self.path, lineno)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, backend: str, prompt: str, params: DecodingParams) -> Completion | None:
        key, _, _ = cache_key(backend, prompt, params)
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                self.misses += 1
                return None
            self.hits += 1
        return Completion.from_json(entry, from_cache=True)

    def put(self, backend: str, prompt: str, params: DecodingParams, completion: Completion) -> None:
        key, prompt_digest, params_digest = cache_key(backend, prompt, params)
        payload = completion.to_json()
        record = {
            "backend": backend,
            "completion": payload,
            "key": key,
            "params": params_digest,
            "prompt": prompt_digest,
        }
        line = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"
        with self._lock:
            self._entries[key] = payload
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line)
