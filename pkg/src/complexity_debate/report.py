"""Offline evaluation of transcripts: every consensus variant is recomputed from stored verdicts."""
from __future__ import annotations

from typing import Mapping, Sequence

from .consensus import LOGIT, SELF_REPORT, ConsensusWeights, Decision, majority_vote, wecc_decide
from .debate import PRESERVED, DebateTranscript
from .metrics import MetricsReport, confusion, format_table, summarize
from .taxonomy import ComplexityClass

VARIANTS = ("majority", "wecc-self", "wecc-logit")


class ReportError(ValueError):
    pass


def recompute(transcript: DebateTranscript, variant: str) -> Decision:
    verdicts = transcript.updated
    if variant == "majority":
        return majority_vote(verdicts)
    s = transcript.settings
    weights = ConsensusWeights(float(s.get("alpha", 2.0)), float(s.get("beta", 1.0)), strict=False)
    source = {"wecc-self": SELF_REPORT, "wecc-logit": LOGIT}[variant]
    return wecc_decide(verdicts, weights, source)


def generated_tokens(transcripts: Sequence[DebateTranscript]) -> dict:
    """Tokens of the backend calls actually made, read back from the transcripts."""
    prompt = completion = calls = 0
    for t in transcripts:
        rounds = [*t.history, t.updated]
        made = [v for v in t.initial if v.raw or v.completion_tokens]
        for r, verdicts in enumerate(rounds, 1):
            events = {e.cls: e.event for e in t.policy_events if e.round == r}
            for v in verdicts:
                copied = any(n.startswith("kept previous verdict") for n in v.notes)
                if events.get(v.expert_class) == PRESERVED or copied:
                    continue
                made.append(v)
        for v in made:
            prompt += v.prompt_tokens
            completion += v.completion_tokens
            calls += 1
    return {"prompt_tokens": prompt, "completion_tokens": completion, "calls": calls}


def build_report(
    transcripts: Sequence[DebateTranscript],
    golds: Mapping[str, ComplexityClass],
    ledger: Mapping | None = None,
) -> tuple[dict, str]:
    if not transcripts:
        raise ReportError("no transcripts to report on")
    missing = sorted({t.snippet_id for t in transcripts} - set(golds))
    if missing:
        raise ReportError(f"{len(missing)} transcript id(s) have no gold label: {', '.join(missing[:20])}")

    groups: dict[str, list[DebateTranscript]] = {}
    for t in transcripts:
        key = "preserve" if t.settings.get("preserve_policy", True) else "change"
        groups.setdefault(key, []).append(t)

    rows: dict[str, MetricsReport] = {}
    payload: dict = {"variants": {}, "confusion": {}}
    for key in sorted(groups):
        members = groups[key]
        gold_list = [golds[t.snippet_id] for t in members]
        for variant in VARIANTS:
            preds = [recompute(t, variant).final for t in members]
            matrix = confusion(gold_list, preds)
            name = f"{key}/{variant}"
            rows[name] = summarize(matrix)
            payload["variants"][name] = {"snippets": len(members), **rows[name].to_json()}
            payload["confusion"][name] = matrix.to_json()

    payload["tokens"] = {"from_transcripts": generated_tokens(transcripts)}
    if ledger is not None:
        payload["tokens"]["ledger"] = dict(ledger)

    headline = max(rows, key=lambda n: (n.endswith("wecc-logit"), n.startswith("preserve")))
    text = format_table(rows)
    text += f"\nconfusion for {headline} (rows = gold, columns = predicted):\n"
    text += _matrix_text(payload["confusion"][headline])
    tok = payload["tokens"]["from_transcripts"]
    text += (
        f"\ntokens (from transcripts): {tok['prompt_tokens']} prompt, "
        f"{tok['completion_tokens']} completion over {tok['calls']} calls\n"
    )
    if ledger is not None and "total" in ledger:
        tot = ledger["total"]
        text += (
            f"tokens (ledger): {tot['prompt_tokens']} prompt, {tot['completion_tokens']} completion, "
            f"{tot['calls']} calls, {tot['cache_hits']} cache hits\n"
        )
    return payload, text


def _matrix_text(block: dict) -> str:
    cols = block["columns"]
    lines = [f"{'':>12}" + "".join(f"{c:>12}" for c in cols)]
    for name, row in zip(block["rows"], block["counts"]):
        lines.append(f"{name:>12}" + "".join(f"{n:>12}" for n in row))
    return "\n".join(lines) + "\n"
