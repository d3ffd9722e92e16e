"""Run configuration (TOML).

Every knob the method leaves open lives here with its default::

    [run]
    fraction = 0.1                 # expertise share of the non-test pool
    seed = 0
    stratify_language = false
    scoring_prompt = "expert-role" # or "neutral"
    parallelism = 1
    output_dir = "run"
    cache_path = ""                # empty disables the response cache
    templates_dir = ""             # optional directory overriding prompt assets
    aliases = ""                   # optional JSON alias -> token file

    [consensus]
    alpha = 2.0                    # must exceed beta
    beta = 1.0
    conf_source = "logit"          # "logit" | "self-report" | "none"

    [debate]
    preserve_policy = true
    permission_sentence = true
    rounds = 1

    [decoding]
    temperature = 0.0
    max_tokens = 512
    logprobs = true
    max_attempts = 3
    backoff = 0.5                  # seconds, doubled per retry
    timeout = 120.0

    [[backends]]                   # repeat per backend
    name = "qwen"
    kind = "http"                  # "http" | "scripted"
    base_url = "http://localhost:8000/v1"
    model = "Qwen/Qwen2.5-Coder-7B-Instruct"
    api_key_env = "OPENAI_API_KEY" # name of the env var holding the token

    [[backends]]
    name = "mock"
    kind = "scripted"
    rules = "mock_rules.json"      # or: entrypoint = "pkg.module:factory", options = {...}

Relative paths resolve against the directory holding the config file.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backends import Backend, DecodingParams, ResponseCache
from .backends.scripted import ScriptedTransport, load_entrypoint, load_rules
from .consensus import CONF_SOURCES, ConsensusWeights
from .debate import DebateSettings
from .expertise import EXPERT_ROLE, NEUTRAL
from .taxonomy import DEFAULT_TABLE, AliasTable, load_alias_table


class ConfigError(ValueError):
    pass


@dataclass
class BackendConfig:
    name: str
    kind: str = "http"
    base_url: str = ""
    model: str = ""
    api_key_env: str = ""
    rules: str = ""
    entrypoint: str = ""
    options: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    backends: list[BackendConfig]
    fraction: float = 0.1
    seed: int = 0
    stratify_language: bool = False
    scoring_prompt: str = EXPERT_ROLE
    parallelism: int = 1
    output_dir: str = "run"
    cache_path: str = ""
    templates_dir: str = ""
    aliases: str = ""
    alpha: float = 2.0
    beta: float = 1.0
    conf_source: str = "logit"
    preserve_policy: bool = True
    permission_sentence: bool = True
    rounds: int = 1
    temperature: float = 0.0
    max_tokens: int = 512
    logprobs: bool = True
    max_attempts: int = 3
    backoff: float = 0.5
    timeout: float = 120.0
    base_dir: Path = field(default_factory=Path, repr=False)

    def __post_init__(self) -> None:
        problems = []
        if not self.alpha > self.beta:
            problems.append(f"alpha ({self.alpha}) must exceed beta ({self.beta})")
        if not self.beta > 0:
            problems.append("beta must be positive")
        if not 0 < self.fraction < 1:
            problems.append(f"fraction must lie in (0, 1), got {self.fraction}")
        if self.rounds < 1:
            problems.append("rounds must be >= 1")
        if self.parallelism < 1:
            problems.append("parallelism must be >= 1")
        if self.conf_source not in CONF_SOURCES:
            problems.append(f"conf_source must be one of {CONF_SOURCES}")
        if self.scoring_prompt not in (EXPERT_ROLE, NEUTRAL):
            problems.append(f"scoring_prompt must be {EXPERT_ROLE!r} or {NEUTRAL!r}")
        names = [b.name for b in self.backends]
        if not names:
            problems.append("at least one [[backends]] entry is required")
        if len(set(names)) != len(names):
            problems.append(f"backend names must be unique: {names}")
        for b in self.backends:
            if b.kind not in ("http", "scripted"):
                problems.append(f"backend {b.name!r}: unknown kind {b.kind!r}")
            elif b.kind == "http" and not (b.base_url and b.model):
                problems.append(f"backend {b.name!r}: http backends need base_url and model")
            elif b.kind == "scripted" and not (b.rules or b.entrypoint):
                problems.append(f"backend {b.name!r}: scripted backends need rules or entrypoint")
        if problems:
            raise ConfigError("; ".join(problems))

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out(self) -> Path:
        return self.resolve(self.output_dir)

    def decoding(self) -> DecodingParams:
        return DecodingParams(temperature=self.temperature, max_tokens=self.max_tokens, logprobs=self.logprobs)

    def weights(self) -> ConsensusWeights:
        return ConsensusWeights(self.alpha, self.beta)

    def debate_settings(self, preserve_policy: bool | None = None) -> DebateSettings:
        return DebateSettings(
            preserve_policy=self.preserve_policy if preserve_policy is None else preserve_policy,
            permission_sentence=self.permission_sentence,
            rounds=self.rounds,
            weights=self.weights(),
            conf_source=self.conf_source,
            params=self.decoding(),
            parallelism=self.parallelism,
        )

    def alias_table(self) -> AliasTable:
        return load_alias_table(self.resolve(self.aliases)) if self.aliases else DEFAULT_TABLE

    def templates_path(self) -> Path | None:
        return self.resolve(self.templates_dir) if self.templates_dir else None

    def to_json(self) -> dict:
        """Effective configuration as written (paths unresolved), for run artifacts."""
        data = asdict(self)
        data.pop("base_dir")
        return data

    def build_backends(self, cache: ResponseCache | None = None) -> dict[str, Backend]:
        out: dict[str, Backend] = {}
        for b in self.backends:
            if b.kind == "http":
                from .backends.http import ChatCompletionsTransport

                transport = ChatCompletionsTransport(
                    b.base_url, b.model, api_key_env=b.api_key_env or None, timeout=self.timeout
                )
            elif b.entrypoint:
                transport = ScriptedTransport(load_entrypoint(b.entrypoint, b.name, b.options))
            else:
                transport = ScriptedTransport(load_rules(self.resolve(b.rules)))
            out[b.name] = Backend(b.name, transport, cache=cache, max_attempts=self.max_attempts, backoff=self.backoff)
        return out

    def open_cache(self) -> ResponseCache | None:
        return ResponseCache(self.resolve(self.cache_path)) if self.cache_path else None


_SECTIONS = {
    "run": {"fraction", "seed", "stratify_language", "scoring_prompt", "parallelism", "output_dir", "cache_path",
            "templates_dir", "aliases"},
    "consensus": {"alpha", "beta", "conf_source"},
    "debate": {"preserve_policy", "permission_sentence", "rounds"},
    "decoding": {"temperature", "max_tokens", "logprobs", "max_attempts", "backoff", "timeout"},
}
_BACKEND_KEYS = {"name", "kind", "base_url", "model", "api_key_env", "rules", "entrypoint", "options"}


def parse_config(data: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    flat: dict[str, Any] = {}
    for section, keys in _SECTIONS.items():
        table = data.get(section, {})
        unknown = set(table) - keys
        if unknown:
            raise ConfigError(f"[{section}] has unknown key(s): {sorted(unknown)}")
        flat.update(table)
    unknown_sections = set(data) - set(_SECTIONS) - {"backends"}
    if unknown_sections:
        raise ConfigError(f"unknown section(s): {sorted(unknown_sections)}")
    backends = []
    for i, entry in enumerate(data.get("backends", [])):
        unknown = set(entry) - _BACKEND_KEYS
        if unknown:
            raise ConfigError(f"backends[{i}] has unknown key(s): {sorted(unknown)}")
        if "name" not in entry:
            raise ConfigError(f"backends[{i}] needs a name")
        backends.append(BackendConfig(**entry))
    try:
        return RunConfig(backends=backends, base_dir=base_dir or Path(), **flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.parent)
