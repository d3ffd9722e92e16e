"""Multi-expert debate for classifying the time complexity of code snippets."""
from __future__ import annotations

from .consensus import ConsensusWeights, Decision, majority_vote, wecc_decide, wecc_score
from .corpus import Snippet, SplitPlan, load_corpus, make_split
from .debate import DebateEngine, DebateSettings, DebateTranscript, run_pipeline
from .expertise import ClassScoreTable, ExpertPanel, assign_experts, score_backends
from .metrics import ConfusionMatrix, confusion, per_class_f1, sign_test, summarize
from .taxonomy import CLASSES, ComplexityClass, class_from_token

__version__ = "0.1.0"

__all__ = [
    "CLASSES",
    "ClassScoreTable",
    "ComplexityClass",
    "ConfusionMatrix",
    "ConsensusWeights",
    "DebateEngine",
    "DebateSettings",
    "DebateTranscript",
    "Decision",
    "ExpertPanel",
    "Snippet",
    "SplitPlan",
    "assign_experts",
    "class_from_token",
    "confusion",
    "load_corpus",
    "majority_vote",
    "make_split",
    "per_class_f1",
    "run_pipeline",
    "score_backends",
    "sign_test",
    "summarize",
    "wecc_decide",
    "wecc_score",
]
