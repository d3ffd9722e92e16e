"""The seven time-complexity classes and the answer vocabulary that maps onto them."""
from __future__ import annotations

import json
import re
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class UnknownLabel(ValueError):
    """Raised when a piece of text does not name one of the seven classes."""


class ComplexityClass(Enum):
    CONSTANT = (0, "constant", "O(1)")
    LOGN = (1, "logn", "O(log n)")
    LINEAR = (2, "linear", "O(n)")
    NLOGN = (3, "nlogn", "O(n log n)")
    QUADRATIC = (4, "quadratic", "O(n^2)")
    CUBIC = (5, "cubic", "O(n^3)")
    EXPONENTIAL = (6, "exponential", "O(2^n)")

    def __init__(self, rank: int, token: str, display: str) -> None:
        self.rank = rank
        self.token = token
        self.display = display

    def __lt__(self, other: ComplexityClass) -> bool:
        if not isinstance(other, ComplexityClass):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other: ComplexityClass) -> bool:
        if not isinstance(other, ComplexityClass):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other: ComplexityClass) -> bool:
        if not isinstance(other, ComplexityClass):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other: ComplexityClass) -> bool:
        if not isinstance(other, ComplexityClass):
            return NotImplemented
        return self.rank >= other.rank

    def __str__(self) -> str:
        return self.token


CLASSES: tuple[ComplexityClass, ...] = tuple(sorted(ComplexityClass, key=lambda c: c.rank))
BY_TOKEN: dict[str, ComplexityClass] = {c.token: c for c in CLASSES}

# (alias, canonical token). Keys are compared after strip() + lower().
DEFAULT_ALIASES: tuple[tuple[str, str], ...] = (
    ("o(1)", "constant"),
    ("constant", "constant"),
    ("logn", "logn"),
    ("log n", "logn"),
    ("o(log n)", "logn"),
    ("o(logn)", "logn"),
    ("logarithmic", "logn"),
    ("linear", "linear"),
    ("o(n)", "linear"),
    ("nlogn", "nlogn"),
    ("n log n", "nlogn"),
    ("o(n log n)", "nlogn"),
    ("o(nlogn)", "nlogn"),
    ("linearithmic", "nlogn"),
    ("quadratic", "quadratic"),
    ("n^2", "quadratic"),
    ("n²", "quadratic"),
    ("o(n^2)", "quadratic"),
    ("o(n²)", "quadratic"),
    ("cubic", "cubic"),
    ("n^3", "cubic"),
    ("n³", "cubic"),
    ("o(n^3)", "cubic"),
    ("o(n³)", "cubic"),
    ("exponential", "exponential"),
    ("2^n", "exponential"),
    ("o(2^n)", "exponential"),
)


def _normalize(text: str) -> str:
    return text.strip().lower()


class AliasTable:
    """Maps surface forms to classes. Construction fails if any alias is ambiguous."""

    def __init__(self, pairs: Iterable[tuple[str, str]]) -> None:
        table: dict[str, ComplexityClass] = {}
        for alias, token in pairs:
            key = _normalize(alias)
            if not key:
                raise ValueError("empty alias")
            if token not in BY_TOKEN:
                raise ValueError(f"alias {alias!r} points at unknown class token {token!r}")
            target = BY_TOKEN[token]
            previous = table.get(key)
            if previous is not None and previous is not target:
                raise ValueError(
                    f"alias {alias!r} maps to both {previous.token!r} and {target.token!r}"
                )
            table[key] = target
        for cls in CLASSES:
            # canonical tokens always resolve to their own class
            if table.setdefault(cls.token, cls) is not cls:
                raise ValueError(f"canonical token {cls.token!r} was re-pointed")
        self._table = table
        # longest alternatives first so "n log n" wins over "log n"
        alternation = "|".join(re.escape(a) for a in sorted(table, key=len, reverse=True))
        self._scanner = re.compile(rf"(?<![a-z0-9_^])(?:{alternation})(?![a-z0-9_^])")

    def __contains__(self, alias: str) -> bool:
        return _normalize(alias) in self._table

    def __len__(self) -> int:
        return len(self._table)

    def items(self) -> list[tuple[str, ComplexityClass]]:
        return sorted(self._table.items())

    def lookup(self, token: str) -> ComplexityClass:
        try:
            return self._table[_normalize(token)]
        except KeyError:
            raise UnknownLabel(f"not a recognized complexity label: {token!r}") from None

    def find_all(self, text: str) -> list[tuple[int, int, ComplexityClass]]:
        """Non-overlapping alias occurrences in ``text`` as (start, end, class).

        Offsets index into ``text`` itself; lowercasing is length-preserving for
        every alias character, so offsets survive normalization.
        """
        lowered = text.lower()
        if len(lowered) != len(text):
            # exotic casefolding changed lengths; fall back to a per-char map
            lowered = "".join(ch.lower() if len(ch.lower()) == 1 else ch for ch in text)
        return [(m.start(), m.end(), self._table[m.group(0)]) for m in self._scanner.finditer(lowered)]

    def extended(self, overrides: Mapping[str, str]) -> AliasTable:
        return AliasTable([*self._table_pairs(), *overrides.items()])

    def _table_pairs(self) -> list[tuple[str, str]]:
        return [(alias, cls.token) for alias, cls in self._table.items()]


DEFAULT_TABLE = AliasTable(DEFAULT_ALIASES)


def class_from_token(token: str, table: AliasTable | None = None) -> ComplexityClass:
    """Resolve an answer token (canonical, display form, or alias) to its class.

    Raises UnknownLabel when nothing matches.
    """
    return (table or DEFAULT_TABLE).lookup(token)


def try_class_from_token(token: str, table: AliasTable | None = None) -> ComplexityClass | None:
    try:
        return class_from_token(token, table)
    except UnknownLabel:
        return None


def class_order(a: ComplexityClass, b: ComplexityClass) -> int:
    """-1 if a sorts before b, 0 if equal, 1 if after."""
    return (a.rank > b.rank) - (a.rank < b.rank)


def load_alias_table(path: str | Path) -> AliasTable:
    """Default table extended with a JSON object of alias -> canonical token."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise ValueError(f"{path}: alias file must be a JSON object of string -> string")
    return DEFAULT_TABLE.extended(data)
