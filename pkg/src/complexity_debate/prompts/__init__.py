from .parse import INITIAL, UPDATED, Verdict, failed_verdict, locate_label, parse_verdict, token_span
from .render import (
    DEBATE_MARKER,
    NO_VALID_LABEL,
    InstructionTemplate,
    PromptError,
    PromptSet,
    default_prompts,
    load_prompt_set,
    render_debate,
    render_initial,
    substitute,
)

__all__ = [
    "DEBATE_MARKER",
    "INITIAL",
    "NO_VALID_LABEL",
    "UPDATED",
    "InstructionTemplate",
    "PromptError",
    "PromptSet",
    "Verdict",
    "default_prompts",
    "failed_verdict",
    "load_prompt_set",
    "locate_label",
    "parse_verdict",
    "render_debate",
    "render_initial",
    "substitute",
    "token_span",
]
