"""Per-class scoring of every backend on the expertise split, and expert assignment."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .backends import Backend, DecodingParams, TokenLedger, TransportError
from .corpus import Snippet
from .metrics import confusion, per_class_f1
from .prompts import INITIAL, PromptSet, default_prompts, parse_verdict, render_initial
from .taxonomy import BY_TOKEN, CLASSES, AliasTable, ComplexityClass, DEFAULT_TABLE

log = logging.getLogger(__name__)

EXPERT_ROLE = "expert-role"
NEUTRAL = "neutral"


class ManifestError(ValueError):
    pass


@dataclass
class ClassScoreTable:
    """F1 per (backend, class); backends keyed by name."""

    scores: dict[str, dict[ComplexityClass, float]]
    split_ref: str | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, row in self.scores.items():
            missing = [c.token for c in CLASSES if c not in row]
            if missing:
                raise ValueError(f"backend {name!r} has no score for {missing}")

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str, float]], split_ref: str | None = None) -> ClassScoreTable:
        return cls({name: {BY_TOKEN[t]: float(v) for t, v in row.items()} for name, row in rows.items()}, split_ref)

    def to_json(self) -> dict:
        return {name: {c.token: self.scores[name][c] for c in CLASSES} for name in sorted(self.scores)}


@dataclass
class ExpertPanel:
    assignment: dict[ComplexityClass, str]
    ties: dict[ComplexityClass, list[str]] = field(default_factory=dict)
    scores: ClassScoreTable | None = None

    def __post_init__(self) -> None:
        missing = [c.token for c in CLASSES if c not in self.assignment]
        if missing:
            raise ValueError(f"panel has no expert for {missing}")

    def __getitem__(self, cls: ComplexityClass) -> str:
        return self.assignment[cls]

    def backends(self) -> list[str]:
        return sorted(set(self.assignment.values()))

    def digest(self) -> str:
        blob = json.dumps({c.token: self.assignment[c] for c in CLASSES}, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def to_json(self) -> dict:
        out: dict = {
            "assignment": {c.token: self.assignment[c] for c in CLASSES},
            "ties": {c.token: list(v) for c, v in sorted(self.ties.items(), key=lambda kv: kv[0].rank)},
            "digest": self.digest(),
        }
        if self.scores is not None:
            out["scores"] = self.scores.to_json()
            out["split"] = self.scores.split_ref
            out["warnings"] = list(self.scores.warnings)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> ExpertPanel:
        try:
            assignment = {BY_TOKEN[t]: name for t, name in data["assignment"].items()}
        except KeyError as exc:
            raise ManifestError(f"panel manifest: bad or missing key {exc.args[0]!r}") from None
        ties = {BY_TOKEN[t]: list(v) for t, v in (data.get("ties") or {}).items()}
        scores = ClassScoreTable.from_rows(data["scores"], data.get("split")) if data.get("scores") else None
        return cls(assignment=assignment, ties=ties, scores=scores)


def write_panel(panel: ExpertPanel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(panel.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_panel(path: str | Path) -> ExpertPanel:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"panel manifest not found: {path}")
    return ExpertPanel.from_json(json.loads(path.read_text(encoding="utf-8")))


def assign_experts(table: ClassScoreTable) -> ExpertPanel:
    """Highest-F1 backend per class; ties go to the lexicographically smallest name."""
    if not table.scores:
        raise ValueError("score table has no backends")
    assignment: dict[ComplexityClass, str] = {}
    ties: dict[ComplexityClass, list[str]] = {}
    for cls in CLASSES:
        best = max(row[cls] for row in table.scores.values())
        top = sorted(name for name, row in table.scores.items() if row[cls] == best)
        assignment[cls] = top[0]
        if len(top) > 1:
            ties[cls] = top
    return ExpertPanel(assignment=assignment, ties=ties, scores=table)


def _check_balanced(snippets: Sequence[Snippet]) -> None:
    if not snippets:
        raise ValueError("expertise split is empty")
    counts = {c: 0 for c in CLASSES}
    for s in snippets:
        counts[s.gold] += 1
    if len(set(counts.values())) != 1:
        raise ValueError(f"expertise split is not class-balanced: { {c.token: n for c, n in counts.items()} }")


def score_backends(
    backends: Sequence[Backend],
    snippets: Sequence[Snippet],
    *,
    mode: str = EXPERT_ROLE,
    prompts: PromptSet | None = None,
    params: DecodingParams | None = None,
    ledger: TokenLedger | None = None,
    parallelism: int = 1,
    aliases: AliasTable = DEFAULT_TABLE,
    split_ref: str | None = None,
) -> ClassScoreTable:
    """Score each backend per class, one-vs-rest F1 over its plain predictions.

    In ``expert-role`` mode backend i is scored for class c on the predictions it
    makes while prompted as the class-c expert, so every snippet is asked once per
    role. ``neutral`` mode asks each snippet once with a role-free instruction and
    reads all seven F1 values off that single confusion matrix. Invalid answers
    count as wrong. A backend that exhausts its retries has its remaining
    snippets marked invalid.
    """
    if mode not in (EXPERT_ROLE, NEUTRAL):
        raise ValueError(f"unknown scoring mode {mode!r}")
    _check_balanced(snippets)
    names = [b.name for b in backends]
    if len(set(names)) != len(names):
        raise ValueError(f"backend names must be unique: {names}")
    prompts = prompts or default_prompts()
    params = params or DecodingParams()
    ledger = ledger if ledger is not None else TokenLedger()
    golds = [s.gold for s in snippets]
    warnings: list[str] = []
    warn_lock = threading.Lock()

    roles: list[ComplexityClass | None] = list(CLASSES) if mode == EXPERT_ROLE else [None]
    scores: dict[str, dict[ComplexityClass, float]] = {}

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        for backend in backends:
            down = threading.Event()

            def ask(job: tuple[ComplexityClass | None, Snippet], backend=backend, down=down):
                role, snippet = job
                if down.is_set():
                    return None
                template = prompts.neutral if role is None else prompts.template(role)
                try:
                    completion = backend.complete(render_initial(template, snippet, prompts), params)
                except TransportError as exc:
                    if not down.is_set():
                        down.set()
                        with warn_lock:
                            warnings.append(f"{backend.name}: {exc}; remaining expertise snippets marked invalid")
                    return None
                ledger.account(completion, backend.name, "expertise")
                return parse_verdict(completion, backend.name, role or snippet.gold, INITIAL, aliases).predicted

            row: dict[ComplexityClass, float] = {}
            for role in roles:
                preds = list(pool.map(ask, [(role, s) for s in snippets]))
                f1 = per_class_f1(confusion(golds, preds))
                if role is None:
                    row = f1
                else:
                    row[role] = f1[role]
            scores[backend.name] = row

    for w in warnings:
        log.warning(w)
    return ClassScoreTable(scores=scores, split_ref=split_ref, warnings=sorted(warnings))
