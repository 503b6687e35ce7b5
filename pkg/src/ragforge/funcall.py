"""Retry-adaptive function calling.

Assembles chat prompts from a persona, a language preference, a detail
level chosen by retry count, and conversation history, then wraps model
output in a tool-call envelope whose query field carries everything the
next round needs. Each failed round bumps the retry count, which selects
a more explicit detail template, so repeated calls self-escalate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

TOOL_NAME = "chat-response-enhancer"

NO_CONTEXT_MARKER = "[no supporting context found]"

BRIEF = "brief"
MEDIUM = "medium"
DETAILED = "detailed"
DETAIL_LEVELS = (BRIEF, MEDIUM, DETAILED)

# Shipped defaults; lengths are strictly increasing so escalation is
# observable. All overridable through config.
DEFAULT_DETAIL_TEMPLATES: dict[str, str] = {
    BRIEF: "Answer concisely in one or two sentences.",
    MEDIUM: (
        "Answer with moderate detail. Explain the key reasoning in a short "
        "paragraph and mention the main supporting evidence."
    ),
    DETAILED: (
        "Answer in full detail. Walk through the reasoning step by step, "
        "quote or cite the supporting context for every claim you make, "
        "state any assumptions explicitly, and finish with a one-sentence "
        "summary the user can act on."
    ),
}

DEFAULT_PERSONA_TEMPLATES: dict[str, str] = {
    "en": "You are {persona}. Respond in English.",
    "zh": "你是{persona}。请使用中文回答。",
}

# Section markers double as the parse delimiters for packed query strings.
_DETAIL_HEADER = "### Detail"
_PERSONA_HEADER = "### Persona"
_HISTORY_HEADER = "### History"
_QUESTION_HEADER = "### Current Question"
_CONTEXT_HEADER = "### Context"


class MissingArgumentError(ValueError):
    """A required tool argument is absent or empty."""


@dataclass(frozen=True)
class PersonaConfig:
    persona: str = "a helpful technical assistant"
    language: str = "en"
    retry: int = 0

    def __post_init__(self) -> None:
        if not self.persona:
            raise ValueError("persona must be non-empty")
        if not self.language:
            raise ValueError("language must be non-empty")
        if self.retry < 0:
            raise ValueError("retry must be >= 0")

    def with_retry(self, retry: int) -> "PersonaConfig":
        return PersonaConfig(self.persona, self.language, retry)


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str = TOOL_NAME
    description: str = (
        "Refine a draft chat response. Takes the packed query context and "
        "the draft output; returns an improved response."
    )
    parameters: tuple[str, ...] = ("query_input", "output")
    required: tuple[str, ...] = ("query_input", "output")

    def __post_init__(self) -> None:
        extra = set(self.required) - set(self.parameters)
        if extra:
            raise ValueError(f"required names not declared as parameters: {sorted(extra)}")


@dataclass
class ToolCallEnvelope:
    tool: str
    tool_input: dict[str, str]

    def __post_init__(self) -> None:
        if not self.tool:
            raise ValueError("tool must be non-empty")
        for key in ("response", "query"):
            if not self.tool_input.get(key):
                raise ValueError(f"tool_input.{key} must be non-empty")

    def to_json(self) -> str:
        return json.dumps(
            {"tool": self.tool, "tool_input": dict(self.tool_input)},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, raw: str) -> "ToolCallEnvelope":
        data = json.loads(raw)
        if not isinstance(data, dict) or not isinstance(data.get("tool_input"), dict):
            raise ValueError("envelope must be {'tool': ..., 'tool_input': {...}}")
        return cls(tool=data.get("tool", ""), tool_input=dict(data["tool_input"]))


def prompt_by_retry(retry: int) -> str:
    """Map a retry count to a detail template id: 0 -> brief, 1 -> medium,
    2 or more -> detailed."""
    if retry < 0:
        raise ValueError("retry must be >= 0")
    if retry == 0:
        return BRIEF
    if retry == 1:
        return MEDIUM
    return DETAILED


def render_persona(
    persona: PersonaConfig,
    templates: Mapping[str, str] | None = None,
) -> str:
    table = templates if templates is not None else DEFAULT_PERSONA_TEMPLATES
    template = table.get(persona.language)
    if template is None:
        template = "You are {persona}. Respond in the language tagged '{language}'."
    return template.format(persona=persona.persona, language=persona.language)


def _one_line(text: str) -> str:
    # History and questions are folded to single lines so the packed
    # string stays parseable by its section delimiters.
    return " ".join(text.split())


def _history_lines(history: Sequence[tuple[str, str]]) -> list[str]:
    lines = []
    for user, assistant in history:
        lines.append(f"User: {_one_line(user)}")
        lines.append(f"Assistant: {_one_line(assistant)}")
    return lines


def build_query_input(
    persona: PersonaConfig,
    history: Sequence[tuple[str, str]],
    current: str,
    *,
    detail_templates: Mapping[str, str] | None = None,
    persona_templates: Mapping[str, str] | None = None,
) -> str:
    """Pack detail level, persona, history, and the current question into
    one deterministic prompt string. The history section is omitted when
    there is no history."""
    if not current:
        raise ValueError("current question must be non-empty")
    details = detail_templates if detail_templates is not None else DEFAULT_DETAIL_TEMPLATES
    sections = [
        f"{_DETAIL_HEADER}\n{details[prompt_by_retry(persona.retry)]}",
        f"{_PERSONA_HEADER}\n{render_persona(persona, persona_templates)}",
    ]
    if history:
        sections.append(_HISTORY_HEADER + "\n" + "\n".join(_history_lines(history)))
    sections.append(f"{_QUESTION_HEADER}\n{_one_line(current)}")
    return "\n\n".join(sections)


def parse_query_input(query_input: str) -> tuple[list[tuple[str, str]], str]:
    """Recover (history, current question) from a packed query string.

    Free-form text without section markers is treated as the question
    itself with no history, so round one can pass a bare question."""
    if _QUESTION_HEADER not in query_input:
        return [], _one_line(query_input)
    history: list[tuple[str, str]] = []
    current = ""
    section = None
    pending_user: str | None = None
    for line in query_input.splitlines():
        if line in (_DETAIL_HEADER, _PERSONA_HEADER, _HISTORY_HEADER, _QUESTION_HEADER):
            section = line
            continue
        if section == _HISTORY_HEADER:
            if line.startswith("User: "):
                pending_user = line[len("User: "):]
            elif line.startswith("Assistant: ") and pending_user is not None:
                history.append((pending_user, line[len("Assistant: "):]))
                pending_user = None
        elif section == _QUESTION_HEADER and line.strip():
            current = line.strip()
            section = None
    return history, current


def invoke(
    args: Mapping[str, str],
    persona: PersonaConfig,
    *,
    tool_name: str = TOOL_NAME,
    detail_templates: Mapping[str, str] | None = None,
    persona_templates: Mapping[str, str] | None = None,
) -> ToolCallEnvelope:
    """Wrap a model result in a tool-call envelope.

    The returned query field is rebuilt at the persona's current retry
    level from the history and question recovered out of args["query_input"],
    so feeding an envelope's query back in escalates only the detail
    section."""
    for name in ("output", "query_input"):
        if not args.get(name):
            raise MissingArgumentError(f"missing: {name}")
    history, current = parse_query_input(args["query_input"])
    if not current:
        raise MissingArgumentError("missing: query_input")
    query = build_query_input(
        persona,
        history,
        current,
        detail_templates=detail_templates,
        persona_templates=persona_templates,
    )
    return ToolCallEnvelope(tool=tool_name, tool_input={"response": args["output"], "query": query})


def build_generation_prompt(
    persona: PersonaConfig,
    history: Sequence[tuple[str, str]],
    question: str,
    documents: Sequence[str],
    *,
    detail_templates: Mapping[str, str] | None = None,
    persona_templates: Mapping[str, str] | None = None,
) -> str:
    """Assemble the answer-generation prompt: detail + persona + retrieved
    context + history + question. Empty context renders an explicit
    no-context marker so the model (and tests) can see the degradation."""
    if not question:
        raise ValueError("question must be non-empty")
    details = detail_templates if detail_templates is not None else DEFAULT_DETAIL_TEMPLATES
    if documents:
        context_body = "\n\n".join(
            f"[{i}] {doc}" for i, doc in enumerate(documents, start=1)
        )
    else:
        context_body = NO_CONTEXT_MARKER
    sections = [
        f"{_DETAIL_HEADER}\n{details[prompt_by_retry(persona.retry)]}",
        f"{_PERSONA_HEADER}\n{render_persona(persona, persona_templates)}",
        f"{_CONTEXT_HEADER}\n{context_body}",
    ]
    if history:
        sections.append(_HISTORY_HEADER + "\n" + "\n".join(_history_lines(history)))
    sections.append(f"{_QUESTION_HEADER}\n{_one_line(question)}")
    sections.append(
        "Answer the current question using only the context above. If the "
        "context is insufficient, say so plainly."
    )
    return "\n\n".join(sections)
