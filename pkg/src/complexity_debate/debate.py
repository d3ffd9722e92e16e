"""Initial round, opinion exchange with the preserve policy, and the resumable per-snippet pipeline.

Transcript file layout: UTF-8 JSON lines, one record per snippet, keys sorted,
compact separators::

    {
      "consensus": {<Decision.to_json()>},
      "initial": [<Verdict.to_json()> x 7, by class rank],
      "panel_digest": <hex>,
      "policy_events": [{"class": <token>, "event": <event>, "round": <int>}, ...],
      "settings": {"alpha", "beta", "conf_source", "permission_sentence", "preserve_policy", "rounds"},
      "snippet_id": <id>,
      "updated": [<Verdict.to_json()> x 7, by class rank],
      "warnings": [<text>, ...]
    }

Rounds beyond the first also store ``"history"``: the verdict lists of the
intermediate rounds. Records are appended and flushed one at a time; a
truncated final line left by a crash is cut off when the file is reopened.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .backends import Backend, DecodingParams, TokenLedger, TransportError
from .consensus import LOGIT, ConsensusWeights, Decision, wecc_decide
from .corpus import Snippet
from .expertise import ExpertPanel
from .prompts import (
    INITIAL,
    UPDATED,
    PromptSet,
    Verdict,
    default_prompts,
    failed_verdict,
    parse_verdict,
    render_debate,
    render_initial,
)
from .taxonomy import BY_TOKEN, CLASSES, DEFAULT_TABLE, AliasTable, ComplexityClass

log = logging.getLogger(__name__)

PRESERVED = "preserved-by-policy"
REVISED = "revised"
KEPT = "kept-voluntarily"
INVALID = "invalid"


class TranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class DebateSettings:
    preserve_policy: bool = True
    permission_sentence: bool = True
    rounds: int = 1
    weights: ConsensusWeights = field(default_factory=ConsensusWeights)
    conf_source: str = LOGIT
    params: DecodingParams = field(default_factory=DecodingParams)
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def to_json(self) -> dict:
        return {
            "preserve_policy": self.preserve_policy,
            "permission_sentence": self.permission_sentence,
            "rounds": self.rounds,
            "alpha": self.weights.alpha,
            "beta": self.weights.beta,
            "conf_source": self.conf_source,
        }


@dataclass(frozen=True)
class PolicyEvent:
    cls: ComplexityClass
    event: str
    round: int = 1

    def to_json(self) -> dict:
        return {"class": self.cls.token, "event": self.event, "round": self.round}


@dataclass
class DebateTranscript:
    snippet_id: str
    panel_digest: str
    initial: list[Verdict]
    updated: list[Verdict]
    policy_events: list[PolicyEvent]
    consensus: Decision | None = None
    settings: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    history: list[list[Verdict]] = field(default_factory=list)
    record: dict | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        out = {
            "snippet_id": self.snippet_id,
            "panel_digest": self.panel_digest,
            "settings": dict(self.settings),
            "initial": [v.to_json() for v in self.initial],
            "updated": [v.to_json() for v in self.updated],
            "policy_events": [e.to_json() for e in self.policy_events],
            "consensus": None if self.consensus is None else self.consensus.to_json(),
            "warnings": list(self.warnings),
        }
        if self.history:
            out["history"] = [[v.to_json() for v in rnd] for rnd in self.history]
        return out

    @classmethod
    def from_json(cls, data: dict) -> DebateTranscript:
        """Rebuild verdicts and events; the consensus block stays raw in ``record``."""
        return cls(
            snippet_id=data["snippet_id"],
            panel_digest=data.get("panel_digest", ""),
            initial=[Verdict.from_json(v) for v in data["initial"]],
            updated=[Verdict.from_json(v) for v in data["updated"]],
            policy_events=[
                PolicyEvent(BY_TOKEN[e["class"]], e["event"], int(e.get("round", 1)))
                for e in data.get("policy_events", [])
            ],
            settings=dict(data.get("settings", {})),
            warnings=list(data.get("warnings", [])),
            history=[[Verdict.from_json(v) for v in rnd] for rnd in data.get("history", [])],
            record=data,
        )

    def transport_failures(self) -> int:
        return sum(1 for w in self.warnings if "call failed: TransportError" in w)


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


class TranscriptStore:
    """Append-only transcript file with resume support."""

    def __init__(self, path: str | Path, panel_digest: str | None = None) -> None:
        self.path = Path(path)
        self.panel_digest = panel_digest
        self._lock = threading.Lock()
        self.records: dict[str, dict] = {}
        if self.path.exists():
            self._recover()

    def _recover(self) -> None:
        raw = self.path.read_bytes()
        if raw and not raw.endswith(b"\n"):
            cut = raw.rfind(b"\n") + 1
            log.warning("%s: dropping truncated trailing record (%d bytes)", self.path, len(raw) - cut)
            with self.path.open("r+b") as fh:
                fh.truncate(cut)
            raw = raw[:cut]
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            record = json.loads(line)
            digest = record.get("panel_digest")
            if self.panel_digest is not None and digest != self.panel_digest:
                raise TranscriptError(
                    f"{self.path}:{lineno}: record was produced with panel {digest}, current panel is {self.panel_digest}"
                )
            self.records[record["snippet_id"]] = record

    def __contains__(self, snippet_id: str) -> bool:
        return snippet_id in self.records

    def append(self, transcript: DebateTranscript) -> None:
        record = transcript.to_json()
        line = dumps_record(record)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self.records[transcript.snippet_id] = record


def read_transcripts(path: str | Path) -> list[DebateTranscript]:
    path = Path(path)
    if not path.exists():
        raise TranscriptError(f"transcript file not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(DebateTranscript.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise TranscriptError(f"{path}:{lineno}: unreadable transcript record ({exc})") from None
    return out


class DebateEngine:
    """Runs the expert panel over snippets.

    ``backends`` maps backend name to :class:`Backend`; the panel decides which
    backend plays each class role. Backend calls go through ``executor`` when
    one is given, otherwise they run inline.
    """

    def __init__(
        self,
        backends: Mapping[str, Backend],
        panel: ExpertPanel,
        settings: DebateSettings | None = None,
        prompts: PromptSet | None = None,
        ledger: TokenLedger | None = None,
        aliases: AliasTable = DEFAULT_TABLE,
        executor: ThreadPoolExecutor | None = None,
    ) -> None:
        missing = [name for name in panel.backends() if name not in backends]
        if missing:
            raise ValueError(f"panel names backends with no configuration: {missing}")
        self.backends = backends
        self.panel = panel
        self.settings = settings or DebateSettings()
        self.prompts = prompts or default_prompts()
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.aliases = aliases
        self.executor = executor

    def _map(self, fn: Callable, items: Iterable) -> list:
        if self.executor is None:
            return [fn(x) for x in items]
        return list(self.executor.map(fn, items))

    def _ask(self, role: ComplexityClass, prompt: str, phase: str, ledger_phase: str) -> tuple[Verdict | None, str | None]:
        backend = self.backends[self.panel[role]]
        try:
            completion = backend.complete(prompt, self.settings.params)
        except TransportError as exc:
            return None, f"{role.token} expert ({backend.name}) {ledger_phase} call failed: TransportError: {exc}"
        self.ledger.account(completion, backend.name, ledger_phase)
        return parse_verdict(completion, backend.name, role, phase, self.aliases), None

    def initial_round(self, snippet: Snippet, warnings: list[str] | None = None) -> list[Verdict]:
        def one(role: ComplexityClass) -> Verdict:
            prompt = render_initial(self.prompts.template(role), snippet, self.prompts)
            verdict, problem = self._ask(role, prompt, INITIAL, "initial")
            if verdict is None:
                if warnings is not None:
                    warnings.append(problem)
                return failed_verdict(self.panel[role], role, INITIAL, problem)
            return verdict

        return self._map(one, CLASSES)

    def debate_round(
        self,
        snippet: Snippet,
        previous: Sequence[Verdict],
        preserve_policy: bool | None = None,
        round_no: int = 1,
        warnings: list[str] | None = None,
    ) -> tuple[list[Verdict], list[PolicyEvent]]:
        preserve = self.settings.preserve_policy if preserve_policy is None else preserve_policy
        by_role = {v.expert_class: v for v in previous}
        if set(by_role) != set(CLASSES):
            raise ValueError("debate round needs exactly one previous verdict per class role")

        def one(role: ComplexityClass) -> tuple[Verdict, str]:
            mine = by_role[role]
            if preserve and mine.predicted is role:
                return mine.as_updated(), PRESERVED
            peers = [by_role[c] for c in CLASSES if c is not role]
            prompt = render_debate(
                self.prompts.template(role),
                snippet,
                peers,
                own=mine,
                prompts=self.prompts,
                permission=self.settings.permission_sentence,
            )
            verdict, problem = self._ask(role, prompt, UPDATED, "debate")
            if verdict is None:
                if warnings is not None:
                    warnings.append(problem)
                return mine.as_updated(f"kept previous verdict: {problem}"), KEPT
            if verdict.predicted is None:
                return verdict, INVALID
            return verdict, KEPT if verdict.predicted is mine.predicted else REVISED

        results = self._map(one, CLASSES)
        updated = [v for v, _ in results]
        events = [PolicyEvent(role, ev, round_no) for role, (_, ev) in zip(CLASSES, results)]
        return updated, events

    def run_snippet(self, snippet: Snippet) -> DebateTranscript:
        warnings: list[str] = []
        initial = self.initial_round(snippet, warnings)
        current = initial
        history: list[list[Verdict]] = []
        events: list[PolicyEvent] = []
        for r in range(1, self.settings.rounds + 1):
            if r > 1:
                history.append(current)
            current, round_events = self.debate_round(snippet, current, round_no=r, warnings=warnings)
            events.extend(round_events)
        decision = wecc_decide(current, self.settings.weights, self.settings.conf_source, self.panel)
        return DebateTranscript(
            snippet_id=snippet.id,
            panel_digest=self.panel.digest(),
            initial=initial,
            updated=current,
            policy_events=events,
            consensus=decision,
            settings=self.settings.to_json(),
            warnings=warnings,
            history=history,
        )


@dataclass
class PipelineResult:
    transcripts: list[DebateTranscript]
    errors: list[tuple[str, str]]
    resumed: int = 0

    @property
    def transport_failures(self) -> int:
        return sum(t.transport_failures() for t in self.transcripts)


def initial_round(snippet: Snippet, panel: ExpertPanel, backends: Mapping[str, Backend], **kwargs) -> list[Verdict]:
    return DebateEngine(backends, panel, **kwargs).initial_round(snippet)


def debate_round(
    snippet: Snippet,
    panel: ExpertPanel,
    backends: Mapping[str, Backend],
    initial: Sequence[Verdict],
    preserve_policy: bool = True,
    **kwargs,
) -> tuple[list[Verdict], list[PolicyEvent]]:
    return DebateEngine(backends, panel, **kwargs).debate_round(snippet, initial, preserve_policy)


def run_pipeline(
    snippets: Sequence[Snippet],
    panel: ExpertPanel,
    backends: Mapping[str, Backend],
    settings: DebateSettings | None = None,
    transcript_path: str | Path | None = None,
    prompts: PromptSet | None = None,
    ledger: TokenLedger | None = None,
    aliases: AliasTable = DEFAULT_TABLE,
) -> PipelineResult:
    """initial round -> debate round(s) -> consensus, per snippet, in input order.

    With ``transcript_path`` every finished snippet is appended immediately and
    snippets already present in the file are loaded instead of recomputed. A
    failing snippet is reported in ``errors`` and never stops the run.
    """
    settings = settings or DebateSettings()
    store = TranscriptStore(transcript_path, panel.digest()) if transcript_path is not None else None
    transcripts: list[DebateTranscript] = []
    errors: list[tuple[str, str]] = []
    resumed = 0
    with ThreadPoolExecutor(max_workers=settings.parallelism) as pool:
        engine = DebateEngine(
            backends,
            panel,
            settings,
            prompts,
            ledger,
            aliases,
            executor=pool if settings.parallelism > 1 else None,
        )
        for snippet in snippets:
            if store is not None and snippet.id in store:
                transcripts.append(DebateTranscript.from_json(store.records[snippet.id]))
                resumed += 1
                continue
            try:
                transcript = engine.run_snippet(snippet)
            except Exception as exc:
                log.exception("snippet %s failed", snippet.id)
                errors.append((snippet.id, f"{type(exc).__name__}: {exc}"))
                continue
            if store is not None:
                store.append(transcript)
            transcripts.append(transcript)
    return PipelineResult(transcripts, errors, resumed)
