"""Weighted expertise-confidence consensus (WECC) and the majority-vote baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .prompts import Verdict
from .taxonomy import CLASSES, ComplexityClass

LOGIT = "logit"
SELF_REPORT = "self-report"
NONE = "none"
CONF_SOURCES = (LOGIT, SELF_REPORT, NONE)

MISSING_CONFIDENCE = 0.5

UNIQUE_MAX = "unique-max"
EXPERT_SELF = "expert-self-prediction"
LOWEST_RANK = "lowest-rank"
ABSTAIN = "abstain"


@dataclass(frozen=True)
class ConsensusWeights:
    """alpha weighs an expert voting for its own class, beta every other vote.

    alpha > beta > 0 is enforced unless ``strict=False``, which ablations use to
    set alpha == beta.
    """

    alpha: float = 2.0
    beta: float = 1.0
    strict: bool = True

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.strict and not self.alpha > self.beta:
            raise ValueError(f"alpha must exceed beta (alpha={self.alpha}, beta={self.beta})")
        if not self.strict and self.alpha < self.beta:
            raise ValueError(f"alpha must be >= beta (alpha={self.alpha}, beta={self.beta})")


@dataclass(frozen=True)
class Contribution:
    role: ComplexityClass
    backend: str
    predicted: ComplexityClass
    w_expertise: float
    w_conf: float
    weight: float
    conf_fallback: bool = False

    def to_json(self) -> dict:
        return {
            "role": self.role.token,
            "backend": self.backend,
            "predicted": self.predicted.token,
            "w_expertise": self.w_expertise,
            "w_conf": self.w_conf,
            "weight": self.weight,
            "conf_fallback": self.conf_fallback,
        }


@dataclass
class ScoreTable:
    scores: dict[ComplexityClass, float]
    contributions: list[Contribution]
    weights: ConsensusWeights | None = None
    conf_source: str = NONE

    def to_json(self) -> dict:
        return {
            "scores": {c.token: self.scores[c] for c in CLASSES},
            "contributions": [c.to_json() for c in self.contributions],
        }


@dataclass
class Decision:
    final: ComplexityClass | None
    method: str
    tie_path: str
    tied: list[ComplexityClass] = field(default_factory=list)
    scores: dict[ComplexityClass, float] = field(default_factory=dict)
    contributions: list[Contribution] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def abstained(self) -> bool:
        return self.final is None

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "final": None if self.final is None else self.final.token,
            "tie_path": self.tie_path,
            "tied": [c.token for c in self.tied],
            "scores": {c.token: self.scores.get(c, 0.0) for c in CLASSES},
            "contributions": [c.to_json() for c in self.contributions],
            "params": dict(self.params),
        }


def _confidence(verdict: Verdict, source: str) -> tuple[float, bool]:
    if source == NONE:
        return 1.0, False
    if source == LOGIT:
        value = verdict.logit_conf
    elif source == SELF_REPORT:
        value = verdict.self_conf
    else:
        raise ValueError(f"unknown confidence source {source!r}; expected one of {CONF_SOURCES}")
    if value is None:
        return MISSING_CONFIDENCE, True
    return float(value), False


def wecc_score(verdicts: Sequence[Verdict], weights: ConsensusWeights, conf_source: str = LOGIT) -> ScoreTable:
    """Per-class sum of w_E * w_conf over the valid verdicts predicting that class."""
    contributions: list[Contribution] = []
    for v in verdicts:
        if v.predicted is None:
            continue
        w_e = weights.alpha if v.predicted is v.expert_class else weights.beta
        w_conf, fallback = _confidence(v, conf_source)
        contributions.append(Contribution(v.expert_class, v.backend, v.predicted, w_e, w_conf, w_e * w_conf, fallback))
    scores = {c: math.fsum(x.weight for x in contributions if x.predicted is c) for c in CLASSES}
    return ScoreTable(scores, contributions, weights, conf_source)


def _self_predicted(verdicts: Sequence[Verdict]) -> set[ComplexityClass]:
    return {v.expert_class for v in verdicts if v.predicted is not None and v.predicted is v.expert_class}


def _argmax(
    scores: dict[ComplexityClass, float], candidates: set[ComplexityClass], self_predicted: set[ComplexityClass]
) -> tuple[ComplexityClass, str, list[ComplexityClass]]:
    best = max(scores[c] for c in candidates)
    tied = sorted(c for c in candidates if scores[c] == best)
    if len(tied) == 1:
        return tied[0], UNIQUE_MAX, tied
    owned = [c for c in tied if c in self_predicted]
    if len(owned) == 1:
        return owned[0], EXPERT_SELF, tied
    # several or no self-predicted classes tied: lowest rank among the preferred pool
    return (owned or tied)[0], LOWEST_RANK, tied


def decide(score: ScoreTable, verdicts: Sequence[Verdict], panel=None) -> Decision:
    """argmax of the score table.

    Only classes that received at least one valid vote compete. Ties go first to
    a tied class whose own expert predicted it, then to the lowest rank. With no
    valid verdict at all the result is an abstain.
    """
    params = {}
    if score.weights is not None:
        params = {"alpha": score.weights.alpha, "beta": score.weights.beta, "conf_source": score.conf_source}
    if panel is not None:
        params["panel"] = panel.digest()
    candidates = {c.predicted for c in score.contributions}
    if not candidates:
        return Decision(None, "wecc", ABSTAIN, scores=dict(score.scores), params=params)
    final, path, tied = _argmax(score.scores, candidates, _self_predicted(verdicts))
    return Decision(final, "wecc", path, tied, dict(score.scores), list(score.contributions), params)


def majority_vote(verdicts: Sequence[Verdict]) -> Decision:
    counts = {c: 0 for c in CLASSES}
    for v in verdicts:
        if v.predicted is not None:
            counts[v.predicted] += 1
    candidates = {c for c, n in counts.items() if n > 0}
    scores = {c: float(n) for c, n in counts.items()}
    if not candidates:
        return Decision(None, "majority", ABSTAIN, scores=scores)
    final, path, tied = _argmax(scores, candidates, _self_predicted(verdicts))
    return Decision(final, "majority", path, tied, scores)


def wecc_decide(
    verdicts: Sequence[Verdict], weights: ConsensusWeights | None = None, conf_source: str = LOGIT, panel=None
) -> Decision:
    return decide(wecc_score(verdicts, weights or ConsensusWeights(), conf_source), verdicts, panel)
