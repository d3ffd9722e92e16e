"""Command line: split -> assign -> debate -> report, each handing off through files.

Artifacts written to the configured output directory::

    split.json              expertise/test id lists, seed, per-class count, corpus path
    panel.json              class -> backend assignment with the per-class F1 table
    expertise_ledger.json   token usage of the expertise scoring calls
    transcripts.jsonl       one debate record per test snippet (transcripts_change.jsonl with --no-preserve)
    ledger.json             token usage of the debate run (ledger_change.json with --no-preserve)
    run.json                effective configuration and arguments of the last debate run
    report.txt, report.json metrics for every consensus variant

Exit codes: 0 success, 1 usage error, 2 data error, 3 transport exhaustion.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from .backends import TokenLedger, TransportError
from .config import ConfigError, RunConfig, load_config
from .corpus import (
    CorpusError,
    Snippet,
    SplitError,
    corpus_digest,
    load_corpus,
    load_id_list,
    make_split,
    read_split,
    write_split,
)
from .debate import TranscriptError, read_transcripts, run_pipeline
from .expertise import ManifestError, assign_experts, read_panel, score_backends, write_panel
from .metrics import dumps
from .prompts import PromptError, load_prompt_set
from .report import ReportError, build_report
from .taxonomy import CLASSES, UnknownLabel

log = logging.getLogger("complexity_debate")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3

LOCK_NAME = ".lock"

_DATA_ERRORS = (
    ConfigError,
    CorpusError,
    SplitError,
    ManifestError,
    TranscriptError,
    ReportError,
    PromptError,
    UnknownLabel,
    json.JSONDecodeError,
    ValueError,
    OSError,
)


class UsageError(Exception):
    pass


class OutputLocked(UsageError):
    pass


@contextmanager
def output_lock(directory: Path) -> Iterator[Path]:
    """Exclusive lock file in ``directory``; a second run on the same directory is refused."""
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLocked(
            f"{directory} is in use by another run (remove {lock} if that run is gone)"
        ) from None
    with os.fdopen(fd, "w") as fh:
        fh.write(f"{os.getpid()}\n")
    try:
        yield lock
    finally:
        lock.unlink(missing_ok=True)


def _write_json(path: Path, payload: object) -> None:
    path.write_text(dumps(payload), encoding="utf-8")


def _counts_line(snippets: Sequence[Snippet], ids: Sequence[str]) -> str:
    by_id = {s.id: s for s in snippets}
    counts = {c: 0 for c in CLASSES}
    for i in ids:
        counts[by_id[i].gold] += 1
    return " ".join(f"{c.token}={n}" for c, n in counts.items())


def _corpus_for(cfg: RunConfig, split_data: dict, corpus: str | None) -> list[Snippet]:
    path = corpus or split_data.get("corpus")
    if not path:
        raise UsageError("no corpus given and the split file does not record one; pass --corpus")
    snippets = load_corpus(path, cfg.alias_table())
    digest = split_data.get("corpus_digest")
    if digest and digest != corpus_digest(snippets):
        raise SplitError(f"corpus {path} does not match the one the split was drawn from")
    return snippets


def cmd_split(config: str, corpus: str, test_ids: str, out: str | None = None) -> int:
    cfg = load_config(config)
    snippets = load_corpus(corpus, cfg.alias_table())
    plan = make_split(snippets, cfg.fraction, load_id_list(test_ids), cfg.seed, cfg.stratify_language)
    plan.check_balance(snippets)
    target = Path(out) if out else cfg.out / "split.json"
    with output_lock(target.parent):
        write_split(plan, target, {"corpus": corpus, "corpus_digest": corpus_digest(snippets)})
    print(f"wrote {target}: {plan.per_class_expertise_count} per class, {len(plan.test_ids)} test ids")
    print(f"expertise counts: {_counts_line(snippets, list(plan.expertise_ids))}")
    return EXIT_OK


def cmd_assign(config: str, split: str, corpus: str | None = None, out: str | None = None) -> int:
    cfg = load_config(config)
    plan, data = read_split(split)
    snippets = _corpus_for(cfg, data, corpus)
    plan.check_balance(snippets)
    by_id = {s.id: s for s in snippets}
    expertise = [by_id[i] for i in (plan.expertise_order or sorted(plan.expertise_ids))]

    target = Path(out) if out else cfg.out / "panel.json"
    with output_lock(target.parent):
        cache = cfg.open_cache()
        ledger = TokenLedger()
        table = score_backends(
            list(cfg.build_backends(cache).values()),
            expertise,
            mode=cfg.scoring_prompt,
            prompts=load_prompt_set(cfg.templates_path()),
            params=cfg.decoding(),
            ledger=ledger,
            parallelism=cfg.parallelism,
            aliases=cfg.alias_table(),
            split_ref=split,
        )
        panel = assign_experts(table)
        write_panel(panel, target)
        _write_json(target.parent / "expertise_ledger.json", ledger.to_json())

    for cls in CLASSES:
        tie = f" (tied: {', '.join(panel.ties[cls])})" if cls in panel.ties else ""
        print(f"{cls.token:>12}: {panel[cls]}  f1={100 * table.scores[panel[cls]][cls]:.2f}{tie}")
    for w in table.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_TRANSPORT if table.warnings else EXIT_OK


def cmd_debate(
    config: str,
    panel: str,
    split: str,
    corpus: str | None = None,
    no_preserve: bool = False,
    out_dir: str | None = None,
) -> int:
    cfg = load_config(config)
    manifest = read_panel(panel)
    plan, data = read_split(split)
    snippets = _corpus_for(cfg, data, corpus)
    test = [s for s in snippets if s.id in plan.test_ids]
    if len(test) != len(plan.test_ids):
        raise SplitError("split lists test ids that are absent from the corpus")

    settings = cfg.debate_settings(preserve_policy=False if no_preserve else None)
    suffix = "" if settings.preserve_policy else "_change"
    directory = Path(out_dir) if out_dir else cfg.out
    with output_lock(directory):
        ledger = TokenLedger()
        result = run_pipeline(
            test,
            manifest,
            cfg.build_backends(cfg.open_cache()),
            settings,
            transcript_path=directory / f"transcripts{suffix}.jsonl",
            prompts=load_prompt_set(cfg.templates_path()),
            ledger=ledger,
            aliases=cfg.alias_table(),
        )
        _write_json(directory / f"ledger{suffix}.json", ledger.to_json())
        _write_json(
            directory / "run.json",
            {
                "config": cfg.to_json(),
                "panel": manifest.digest(),
                "preserve_policy": settings.preserve_policy,
                "split": split,
            },
        )

    tot = ledger.total
    print(
        f"{len(result.transcripts)} transcripts ({result.resumed} resumed), "
        f"{tot.calls} calls, {tot.prompt} prompt + {tot.completion} completion tokens, {tot.cache_hits} cache hits"
    )
    for sid, problem in result.errors:
        print(f"error: snippet {sid}: {problem}", file=sys.stderr)
    if result.transport_failures:
        print(f"warning: {result.transport_failures} backend call(s) exhausted their retries", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_DATA if result.errors else EXIT_OK


def cmd_report(
    transcripts: Sequence[str],
    corpus: str,
    ledger: str | None = None,
    out_dir: str | None = None,
) -> int:
    records = [t for path in transcripts for t in read_transcripts(path)]
    golds = {s.id: s.gold for s in load_corpus(corpus)}
    ledger_data = json.loads(Path(ledger).read_text(encoding="utf-8")) if ledger else None
    payload, text = build_report(records, golds, ledger_data)
    directory = Path(out_dir) if out_dir else Path(transcripts[0]).parent
    with output_lock(directory):
        (directory / "report.txt").write_text(text, encoding="utf-8")
        _write_json(directory / "report.json", payload)
    sys.stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="complexity-debate", description="Expert-panel debate for time-complexity labels.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="draw the class-balanced expertise split")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True, help="JSONL with src, complexity, language (and optional id)")
    p.add_argument("--test-ids", required=True, help="file with one test snippet id per line")
    p.add_argument("--out", help="plan file (default: <output_dir>/split.json)")

    p = sub.add_parser("assign", help="score backends on the expertise split and assign one expert per class")
    p.add_argument("--config", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--corpus", help="defaults to the corpus recorded in the split file")
    p.add_argument("--out", help="panel manifest (default: <output_dir>/panel.json)")

    p = sub.add_parser("debate", help="run the panel over the test split")
    p.add_argument("--config", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--corpus", help="defaults to the corpus recorded in the split file")
    p.add_argument("--no-preserve", action="store_true", help="let experts change in-class predictions")
    p.add_argument("--out-dir", help="default: the configured output_dir")

    p = sub.add_parser("report", help="metrics for every consensus variant, recomputed from transcripts")
    p.add_argument("--transcripts", required=True, nargs="+")
    p.add_argument("--corpus", required=True, help="gold labels")
    p.add_argument("--ledger", help="ledger.json to include in the token summary")
    p.add_argument("--out-dir", help="default: directory of the first transcript file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "split":
            return cmd_split(args.config, args.corpus, args.test_ids, args.out)
        if args.command == "assign":
            return cmd_assign(args.config, args.split, args.corpus, args.out)
        if args.command == "debate":
            return cmd_debate(args.config, args.panel, args.split, args.corpus, args.no_preserve, args.out_dir)
        return cmd_report(args.transcripts, args.corpus, args.ledger, args.out_dir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
