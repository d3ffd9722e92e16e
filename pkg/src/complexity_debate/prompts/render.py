from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from ..corpus import Snippet
from ..taxonomy import CLASSES, ComplexityClass
from .parse import Verdict

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")

DEBATE_MARKER = "Other experts' answers and reasoning:"
NO_VALID_LABEL = "no valid label"


class PromptError(ValueError):
    pass


def _read_asset(name: str, directory: Path | None) -> str:
    if directory is not None:
        candidate = directory / name
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return resources.files(__package__).joinpath("assets", name).read_text(encoding="utf-8")


def substitute(layout: str, values: Mapping[str, str]) -> str:
    """Single-pass placeholder fill; substituted text is never re-scanned."""

    def fill(match: re.Match[str]) -> str:
        key = match.group(1)
        if key not in values:
            raise PromptError(f"layout placeholder {{{{{key}}}}} has no value")
        return values[key]

    return _PLACEHOLDER.sub(fill, layout)


@dataclass(frozen=True)
class InstructionTemplate:
    cls: ComplexityClass | None  # None marks the neutral, role-free instruction
    body: str


@dataclass(frozen=True)
class PromptSet:
    templates: Mapping[ComplexityClass, InstructionTemplate]
    neutral: InstructionTemplate
    footer: str
    initial_layout: str
    debate_layout: str
    permission: str

    def template(self, cls: ComplexityClass) -> InstructionTemplate:
        return self.templates[cls]


def load_prompt_set(directory: str | Path | None = None) -> PromptSet:
    """Bundled assets, with any same-named file in ``directory`` taking precedence."""
    d = Path(directory) if directory is not None else None
    templates = {c: InstructionTemplate(c, _read_asset(f"{c.token}.txt", d).rstrip("\n")) for c in CLASSES}
    return PromptSet(
        templates=templates,
        neutral=InstructionTemplate(None, _read_asset("neutral.txt", d).rstrip("\n")),
        footer=_read_asset("footer.txt", d).rstrip("\n"),
        initial_layout=_read_asset("initial.txt", d),
        debate_layout=_read_asset("debate.txt", d),
        permission=_read_asset("permission.txt", d).strip(),
    )


_DEFAULT: PromptSet | None = None


def default_prompts() -> PromptSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_prompt_set()
    return _DEFAULT


def render_initial(template: InstructionTemplate, snippet: Snippet, prompts: PromptSet | None = None) -> str:
    prompts = prompts or default_prompts()
    return substitute(
        prompts.initial_layout,
        {"instruction": template.body, "code": snippet.source, "footer": prompts.footer},
    )


def _label(verdict: Verdict) -> str:
    return verdict.predicted.token if verdict.predicted is not None else NO_VALID_LABEL


def _peer_block(verdict: Verdict) -> str:
    role = verdict.expert_class
    head = f"[Expert on {role.token} ({role.display})] answer: {_label(verdict)}"
    if verdict.predicted is None:
        return f"{head}\nRaw output:\n{verdict.raw.strip() or '(empty)'}"
    return f"{head}\nReasoning:\n{verdict.opinion.strip() or '(none given)'}"


def render_debate(
    template: InstructionTemplate,
    snippet: Snippet,
    peers: Sequence[Verdict],
    own: Verdict | None = None,
    prompts: PromptSet | None = None,
    permission: bool = True,
) -> str:
    """Exchange-of-opinions prompt for one expert.

    ``peers`` are the other roles' verdicts (never the receiver's own); they are
    listed by class rank. ``own`` is the receiver's previous verdict, restated in
    the header so it knows what it would be keeping.
    """
    if not peers:
        raise PromptError("debate prompt needs at least one peer verdict")
    if template.cls is not None and any(p.expert_class is template.cls for p in peers):
        raise PromptError(f"peers include the receiving {template.cls.token} expert's own verdict")
    prompts = prompts or default_prompts()
    ordered = sorted(peers, key=lambda v: v.expert_class.rank)
    if own is None:
        own_label, own_opinion = NO_VALID_LABEL, "(none)"
    else:
        own_label = _label(own)
        own_opinion = (own.opinion if own.predicted is not None else own.raw).strip() or "(none)"
    return substitute(
        prompts.debate_layout,
        {
            "instruction": template.body,
            "code": snippet.source,
            "own_label": own_label,
            "own_opinion": own_opinion,
            "peers": "\n\n".join(_peer_block(v) for v in ordered),
            "permission": f" {prompts.permission}" if permission else "",
            "footer": prompts.footer,
        },
    )
