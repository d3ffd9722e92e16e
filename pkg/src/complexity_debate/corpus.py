"""Corpus ingestion and the class-balanced expertise / test split."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .taxonomy import CLASSES, AliasTable, ComplexityClass, UnknownLabel, class_from_token


class CorpusError(ValueError):
    """Malformed corpus, id list, or split input."""


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Snippet:
    id: str
    language: str
    source: str
    gold: ComplexityClass

    def __post_init__(self) -> None:
        if not self.source:
            raise CorpusError(f"snippet {self.id!r} has empty source")


REQUIRED_KEYS = ("src", "complexity", "language")


def _parse_record(raw: object, index: int, aliases: AliasTable | None) -> Snippet:
    if not isinstance(raw, dict):
        raise CorpusError(f"record {index}: expected a JSON object")
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise CorpusError(f"record {index}: missing field {key!r}")
        if not isinstance(raw[key], str):
            raise CorpusError(f"record {index}: field {key!r} must be a string")
    if not raw["src"]:
        raise CorpusError(f"record {index}: field 'src' is empty")
    try:
        gold = class_from_token(raw["complexity"], aliases)
    except UnknownLabel:
        raise CorpusError(
            f"record {index}: field 'complexity' has unrecognized label {raw['complexity']!r}"
        ) from None
    rid = raw.get("id")
    if rid is None:
        rid = str(index)
    elif not isinstance(rid, (str, int)):
        raise CorpusError(f"record {index}: field 'id' must be a string")
    return Snippet(id=str(rid), language=raw["language"], source=raw["src"], gold=gold)


def load_corpus(path: str | Path, aliases: AliasTable | None = None) -> list[Snippet]:
    """Read a JSON-lines corpus, one record per line, preserving file order.

    Each record carries ``src``, ``complexity``, ``language`` and optionally ``id``;
    a missing id becomes the zero-based record index. Blank lines are skipped but
    still count toward the index.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    snippets: list[Snippet] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: record {index}: invalid JSON ({exc.msg})") from None
            try:
                snippet = _parse_record(raw, index, aliases)
            except CorpusError as exc:
                raise CorpusError(f"{path}: {exc}") from None
            if snippet.id in seen:
                raise CorpusError(
                    f"{path}: record {index}: duplicate id {snippet.id!r} (first seen at record {seen[snippet.id]})"
                )
            seen[snippet.id] = index
            snippets.append(snippet)
    return snippets


def load_id_list(path: str | Path) -> list[str]:
    """One id per line; surrounding whitespace and blank lines are ignored."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"id list not found: {path}")
    ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return [i for i in ids if i]


def corpus_digest(snippets: Iterable[Snippet]) -> str:
    h = hashlib.sha256()
    for s in snippets:
        h.update(json.dumps([s.id, s.language, s.gold.token, s.source]).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True)
class SplitPlan:
    expertise_ids: frozenset[str]
    test_ids: frozenset[str]
    per_class_expertise_count: int
    seed: int
    fraction: float = 0.1
    # expertise ids in sampling order (class rank, then draw order)
    expertise_order: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        overlap = self.expertise_ids & self.test_ids
        if overlap:
            sample = ", ".join(sorted(overlap)[:5])
            raise SplitError(f"expertise and test splits overlap on {len(overlap)} id(s): {sample}")
        if self.per_class_expertise_count < 1:
            raise SplitError("per_class_expertise_count must be >= 1")

    def to_json(self) -> dict:
        order = list(self.expertise_order) or sorted(self.expertise_ids)
        return {
            "fraction": self.fraction,
            "seed": self.seed,
            "per_class_expertise_count": self.per_class_expertise_count,
            "expertise_ids": order,
            "test_ids": sorted(self.test_ids),
        }

    @classmethod
    def from_json(cls, data: dict) -> SplitPlan:
        try:
            order = tuple(data["expertise_ids"])
            return cls(
                expertise_ids=frozenset(order),
                test_ids=frozenset(data["test_ids"]),
                per_class_expertise_count=int(data["per_class_expertise_count"]),
                seed=int(data["seed"]),
                fraction=float(data.get("fraction", 0.1)),
                expertise_order=order,
            )
        except KeyError as exc:
            raise SplitError(f"split plan is missing key {exc.args[0]!r}") from None

    def check_balance(self, snippets: Sequence[Snippet]) -> None:
        by_id = {s.id: s for s in snippets}
        missing = [i for i in self.expertise_ids | self.test_ids if i not in by_id]
        if missing:
            raise SplitError(f"split references {len(missing)} id(s) absent from corpus, e.g. {sorted(missing)[0]!r}")
        counts = {c: 0 for c in CLASSES}
        for i in self.expertise_ids:
            counts[by_id[i].gold] += 1
        bad = {c.token: n for c, n in counts.items() if n != self.per_class_expertise_count}
        if bad:
            raise SplitError(
                f"expertise split is unbalanced (want {self.per_class_expertise_count} per class): {bad}"
            )


def make_split(
    corpus: Sequence[Snippet],
    fraction: float,
    test_ids: Iterable[str],
    seed: int,
    stratify_language: bool = False,
) -> SplitPlan:
    """Sample an equal number of non-test snippets per class.

    The per-class count is ``floor(fraction * |non-test| / 7)``; leftovers stay
    unused. With ``stratify_language`` the per-class quota is split evenly across
    languages and must divide by the language count.
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must lie in (0, 1), got {fraction}")
    test = frozenset(test_ids)
    ids = {s.id for s in corpus}
    unknown = sorted(test - ids)
    if unknown:
        raise SplitError(f"{len(unknown)} test id(s) not found in corpus, e.g. {unknown[0]!r}")

    pool = [s for s in corpus if s.id not in test]
    # integer floor of fraction * n / 7 without float drift, e.g. 0.1 * 4410 / 7
    per_class = _floor_quota(fraction, len(pool), len(CLASSES))
    if per_class < 1:
        raise SplitError(
            f"fraction {fraction} of {len(pool)} non-test snippets gives zero samples per class"
        )

    rng = random.Random(seed)
    chosen: list[str] = []
    for cls in CLASSES:
        members = [s for s in pool if s.gold is cls]
        if stratify_language:
            chosen.extend(_stratified_draw(members, cls, per_class, rng))
            continue
        if len(members) < per_class:
            raise SplitError(
                f"class {cls.token!r} has {len(members)} non-test snippets, need {per_class}"
            )
        chosen.extend(s.id for s in rng.sample(members, per_class))

    return SplitPlan(
        expertise_ids=frozenset(chosen),
        test_ids=test,
        per_class_expertise_count=per_class,
        seed=seed,
        fraction=fraction,
        expertise_order=tuple(chosen),
    )


def _floor_quota(fraction: float, n: int, k: int) -> int:
    return int(Fraction(str(fraction)) * n / k)


def _stratified_draw(members: list[Snippet], cls: ComplexityClass, quota: int, rng: random.Random) -> list[str]:
    languages = sorted({s.language for s in members})
    if not languages:
        raise SplitError(f"class {cls.token!r} has 0 non-test snippets, need {quota}")
    per_lang, rem = divmod(quota, len(languages))
    if rem:
        raise SplitError(
            f"class {cls.token!r}: quota {quota} does not divide evenly over languages {languages}"
        )
    out: list[str] = []
    for lang in languages:
        cell = [s for s in members if s.language == lang]
        if len(cell) < per_lang:
            raise SplitError(
                f"class {cls.token!r} language {lang!r} has {len(cell)} non-test snippets, need {per_lang}"
            )
        out.extend(s.id for s in rng.sample(cell, per_lang))
    return out


def write_split(plan: SplitPlan, path: str | Path, extra: dict | None = None) -> None:
    payload = {**(extra or {}), **plan.to_json()}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_split(path: str | Path) -> tuple[SplitPlan, dict]:
    path = Path(path)
    if not path.exists():
        raise SplitError(f"split file not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    return SplitPlan.from_json(data), data
