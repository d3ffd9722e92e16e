"""Confusion matrices, accuracy, one-vs-rest / macro / weighted F1, and the paired sign test."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

from .taxonomy import CLASSES, ComplexityClass

ABSTAIN = len(CLASSES)  # column index for abstains


@dataclass
class ConfusionMatrix:
    """Rows are gold classes by rank; columns are predicted classes by rank plus one abstain column."""

    counts: list[list[int]]

    @classmethod
    def empty(cls) -> ConfusionMatrix:
        return cls([[0] * (len(CLASSES) + 1) for _ in CLASSES])

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))

    def cell(self, gold: ComplexityClass, predicted: ComplexityClass | None) -> int:
        return self.counts[gold.rank][ABSTAIN if predicted is None else predicted.rank]

    def support(self) -> dict[ComplexityClass, int]:
        return {c: sum(self.counts[c.rank]) for c in CLASSES}

    def to_json(self) -> dict:
        return {
            "rows": [c.token for c in CLASSES],
            "columns": [c.token for c in CLASSES] + ["abstain"],
            "counts": [list(r) for r in self.counts],
        }


def confusion(golds: Sequence[ComplexityClass], predictions: Sequence[ComplexityClass | None]) -> ConfusionMatrix:
    if len(golds) != len(predictions):
        raise ValueError(f"{len(golds)} gold labels but {len(predictions)} predictions")
    m = ConfusionMatrix.empty()
    for g, p in zip(golds, predictions):
        m.counts[g.rank][ABSTAIN if p is None else p.rank] += 1
    return m


def _f1(tp: int, fp: int, fn: int) -> Fraction:
    # 0/0 precision or recall counts as 0, and so does a 0/0 harmonic mean
    if tp == 0:
        return Fraction(0)
    return Fraction(2 * tp, 2 * tp + fp + fn)


def per_class_f1_exact(matrix: ConfusionMatrix) -> dict[ComplexityClass, Fraction]:
    out = {}
    for c in CLASSES:
        i = c.rank
        tp = matrix.counts[i][i]
        fp = sum(matrix.counts[g][i] for g in range(len(CLASSES))) - tp
        fn = sum(matrix.counts[i]) - tp  # includes abstains
        out[c] = _f1(tp, fp, fn)
    return out


def per_class_f1(matrix: ConfusionMatrix) -> dict[ComplexityClass, float]:
    return {c: float(v) for c, v in per_class_f1_exact(matrix).items()}


@dataclass
class MetricsReport:
    accuracy: float
    per_class_f1: dict[ComplexityClass, float]
    macro_f1: float
    weighted_f1: float
    support: dict[ComplexityClass, int]
    abstains: int = 0

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "abstains": self.abstains,
            "per_class": [
                {"class": c.token, "f1": self.per_class_f1[c], "support": self.support[c]} for c in CLASSES
            ],
        }


def summarize(matrix: ConfusionMatrix) -> MetricsReport:
    total = matrix.total
    if total == 0:
        raise ValueError("cannot summarize an empty confusion matrix")
    f1 = per_class_f1_exact(matrix)
    support = matrix.support()
    trace = sum(matrix.counts[c.rank][c.rank] for c in CLASSES)
    macro = sum(f1.values(), Fraction(0)) / len(CLASSES)
    weighted = sum((support[c] * f1[c] for c in CLASSES), Fraction(0)) / sum(support.values())
    return MetricsReport(
        accuracy=float(Fraction(trace, total)),
        per_class_f1={c: float(v) for c, v in f1.items()},
        macro_f1=float(macro),
        weighted_f1=float(weighted),
        support=support,
        abstains=sum(row[ABSTAIN] for row in matrix.counts),
    )


def sign_test(wins: int, trials: int) -> Fraction:
    """One-sided exact sign test: P(X >= wins) for X ~ Binomial(trials, 1/2)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if wins < 0 or wins > trials:
        raise ValueError(f"wins must lie in 0..{trials}, got {wins}")
    return Fraction(sum(comb(trials, i) for i in range(wins, trials + 1)), 2**trials)


def format_table(rows: Mapping[str, MetricsReport]) -> str:
    """Fixed-width text table, one row per variant, values in percent."""
    heads = ["variant", "acc", "macro_f1", "weighted_f1"] + [c.token for c in CLASSES]
    width = max(12, *(len(n) for n in rows)) if rows else 12
    lines = [f"{heads[0]:<{width}}" + "".join(f"{h:>12}" for h in heads[1:])]
    for name, rep in rows.items():
        cells = [rep.accuracy, rep.macro_f1, rep.weighted_f1] + [rep.per_class_f1[c] for c in CLASSES]
        lines.append(f"{name:<{width}}" + "".join(f"{100 * x:>12.2f}" for x in cells))
    return "\n".join(lines) + "\n"


def dumps(obj: object) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
