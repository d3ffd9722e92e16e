"""Builds a self-contained run directory for CLI tests."""
from __future__ import annotations

from pathlib import Path

from complexity_debate.taxonomy import CLASSES

from scripted_fixtures import gold_snippets, write_corpus

BACKENDS = [f"b{c.rank}" for c in CLASSES]


def config_text(backends=BACKENDS, factory="scripted_fixtures:panel_responder", extra_run="", extra=""):
    lines = [
        "[run]",
        "fraction = 0.5",
        "seed = 7",
        'output_dir = "out"',
        'cache_path = "cache.jsonl"',
        extra_run,
        "",
        "[decoding]",
        "backoff = 0.0",
        "",
        extra,
    ]
    for name in backends:
        lines += ["[[backends]]", f'name = "{name}"', 'kind = "scripted"', f'entrypoint = "{factory}"', ""]
    return "\n".join(lines) + "\n"


def make_run_dir(root: Path, per_class: int = 20, test_per_class: int = 10, **config_kw) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    snippets = gold_snippets(per_class)
    write_corpus(root / "corpus.jsonl", snippets)
    test = [s.id for s in snippets if int(s.id.rsplit("-", 1)[1]) >= per_class - test_per_class]
    (root / "test_ids.txt").write_text("\n".join(test) + "\n")
    (root / "run.toml").write_text(config_text(**config_kw))
    return root
