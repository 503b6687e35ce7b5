"""Self-reflective RAG agent.

A turn walks an explicit state graph: retrieve -> grade_documents ->
route -> (generate | transform_query) -> ... until a route decides "end".
Grading drops irrelevant context, generation is quality-checked for
groundedness and question fit, and failed checks spend bounded rewrite /
regeneration budgets. Exhausted budgets end the turn with a best-effort
answer flagged degraded instead of an error.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .backend import Backend, BackendError, GenRequest
from .funcall import (
    NO_CONTEXT_MARKER,
    PersonaConfig,
    build_generation_prompt,
    build_query_input,
    invoke as funcall_invoke,
)
from .retrieval import ScoredDoc

logger = logging.getLogger(__name__)

NODE_RETRIEVE = "retrieve"
NODE_GRADE = "grade_documents"
NODE_GENERATE = "generate"
NODE_TRANSFORM = "transform_query"
NODE_ROUTE = "route"
NODE_NAMES = (NODE_RETRIEVE, NODE_GRADE, NODE_GENERATE, NODE_TRANSFORM, NODE_ROUTE)

# Real graph nodes; route events record decisions but are not executions.
EXEC_NODES = (NODE_RETRIEVE, NODE_GRADE, NODE_GENERATE, NODE_TRANSFORM)

ROUTE_GENERATE = "generate"
ROUTE_TRANSFORM = "transform_query"
ROUTE_END = "end"

GRADE_TEMPLATE = (
    "You grade search results for relevance.\n\n"
    "Question: {question}\n\n"
    "Document:\n{document}\n\n"
    'Is this document relevant to the question? Respond with JSON only: '
    '{{"relevant": true or false}}.'
)

GROUNDED_TEMPLATE = (
    "You check whether an answer is grounded in the provided context.\n\n"
    "Context:\n{context}\n\n"
    "Answer:\n{answer}\n\n"
    'Is every claim in the answer supported by the context? Respond with '
    'JSON only: {{"grounded": true or false}}.'
)

ADDRESSES_TEMPLATE = (
    "You check whether an answer addresses the question asked.\n\n"
    "Question: {question}\n\n"
    "Answer:\n{answer}\n\n"
    'Does the answer address the question? Respond with JSON only: '
    '{{"addresses": true or false}}.'
)

REWRITE_TEMPLATE = (
    "You rewrite search queries to improve document retrieval.\n\n"
    "Question: {question}\n\n"
    "{history_block}"
    "No relevant documents were found for this question. Rewrite it to be "
    "clearer and more specific for search. Return only the rewritten question."
)


class AgentTurnError(Exception):
    """Turn-level failure; carries the partial trace for diagnostics."""

    def __init__(self, message: str, trace: list["TraceEvent"]):
        super().__init__(message)
        self.trace = trace


@dataclass
class AgentLimits:
    max_rewrites: int = 3
    max_regens: int = 2

    def __post_init__(self) -> None:
        if self.max_rewrites < 0 or self.max_regens < 0:
            raise ValueError("budgets must be >= 0")

    def node_execution_bound(self) -> int:
        return (self.max_rewrites + 1) * (self.max_regens + 3) + 1


@dataclass
class TraceEvent:
    node: str
    summary: str
    outcome: str
    ts: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        if self.node not in NODE_NAMES:
            raise ValueError(f"unknown node name {self.node!r}")

    def to_dict(self) -> dict:
        return {"node": self.node, "summary": self.summary, "outcome": self.outcome, "ts": self.ts}


@dataclass
class GraphState:
    original_question: str
    question: str
    documents: list[ScoredDoc] = field(default_factory=list)
    generation: str | None = None
    chat_history: list[tuple[str, str]] = field(default_factory=list)
    rewrite_count: int = 0
    regen_count: int = 0
    degraded: bool = False
    trace: list[TraceEvent] = field(default_factory=list)

    def add_event(self, node: str, summary: str, outcome: str) -> None:
        self.trace.append(TraceEvent(node=node, summary=summary, outcome=outcome))


@dataclass
class AgentOptions:
    persona: PersonaConfig = field(default_factory=PersonaConfig)
    use_funcall: bool = False
    temperature: float = 0.0
    seed: int = 0
    grade_template: str = GRADE_TEMPLATE
    grounded_template: str = GROUNDED_TEMPLATE
    addresses_template: str = ADDRESSES_TEMPLATE
    rewrite_template: str = REWRITE_TEMPLATE
    detail_templates: dict[str, str] | None = None
    persona_templates: dict[str, str] | None = None


RetrieveFn = Callable[[str], list[ScoredDoc]]


class AgenticRag:
    """Runs bounded self-correcting turns over an injected retriever and
    model backend. One instance may serve many sequential turns; per-turn
    state lives in GraphState, so distinct sessions can share an instance."""

    def __init__(
        self,
        retrieve_fn: RetrieveFn,
        backend: Backend,
        limits: AgentLimits | None = None,
        options: AgentOptions | None = None,
    ):
        self.retrieve_fn = retrieve_fn
        self.backend = backend
        self.limits = limits or AgentLimits()
        self.options = options or AgentOptions()

    # -- nodes --------------------------------------------------------

    def retrieve(self, state: GraphState) -> GraphState:
        if not state.question:
            raise ValueError("question must be non-empty")
        state.documents = list(self.retrieve_fn(state.question))
        state.add_event(NODE_RETRIEVE, state.question, f"{len(state.documents)} documents")
        return state

    def _judge(self, prompt: str, key: str, warnings: list[str]) -> bool:
        try:
            return self.backend.judge_bool(prompt, key)
        except BackendError as exc:
            warnings.append(f"{key} judge failed: {exc}")
            logger.warning("judge %s failed, treating as false: %s", key, exc)
            return False

    def grade_documents(self, state: GraphState) -> GraphState:
        verdicts: list[bool] = []
        warnings: list[str] = []
        kept: list[ScoredDoc] = []
        for doc in state.documents:
            prompt = self.options.grade_template.format(
                question=state.question, document=doc.text
            )
            verdict = self._judge(prompt, "relevant", warnings)
            verdicts.append(verdict)
            if verdict:
                kept.append(doc)
        state.documents = kept
        summary = f"verdicts={json.dumps(verdicts)}"
        if warnings:
            summary += f" warnings={json.dumps(warnings)}"
        state.add_event(NODE_GRADE, summary, f"kept {len(kept)}/{len(verdicts)}")
        return state

    def route_after_grading(self, state: GraphState) -> str:
        if state.documents:
            label = ROUTE_GENERATE
            reason = f"kept={len(state.documents)}"
        elif state.rewrite_count < self.limits.max_rewrites:
            label = ROUTE_TRANSFORM
            reason = f"kept=0 rewrites={state.rewrite_count}/{self.limits.max_rewrites}"
        else:
            state.degraded = True
            label = ROUTE_GENERATE
            reason = "kept=0 rewrite budget exhausted, degraded"
        state.add_event(NODE_ROUTE, reason, label)
        return label

    def transform_query(self, state: GraphState) -> GraphState:
        history_block = ""
        if state.chat_history:
            lines = [f"User: {u}\nAssistant: {a}" for u, a in state.chat_history]
            history_block = "Conversation so far:\n" + "\n".join(lines) + "\n\n"
        prompt = self.options.rewrite_template.format(
            question=state.original_question, history_block=history_block
        )
        old = state.question
        try:
            response = self.backend.generate(
                GenRequest(prompt=prompt, temperature=0.0, seed=self.options.seed)
            )
            rewritten = response.text.strip()
        except BackendError as exc:
            rewritten = ""
            logger.warning("query rewrite failed, keeping question: %s", exc)
        # Counter advances even on failure so a dead backend cannot livelock
        # the rewrite loop.
        state.rewrite_count += 1
        if rewritten:
            state.question = rewritten
            state.add_event(NODE_TRANSFORM, f"{old} -> {rewritten}", "rewritten")
        else:
            state.add_event(NODE_TRANSFORM, f"{old} (rewrite failed)", "kept")
        return state

    def generate(self, state: GraphState) -> GraphState:
        persona = self.options.persona.with_retry(state.regen_count)
        prompt = build_generation_prompt(
            persona,
            state.chat_history,
            state.question,
            [doc.text for doc in state.documents],
            detail_templates=self.options.detail_templates,
            persona_templates=self.options.persona_templates,
        )
        text = ""
        failure: BackendError | None = None
        for _ in range(2):  # one immediate retry on failure
            try:
                response = self.backend.generate(
                    GenRequest(
                        prompt=prompt,
                        temperature=self.options.temperature,
                        seed=self.options.seed,
                    )
                )
                text = response.text.strip()
                failure = None
                if text:
                    break
                failure = BackendError("backend returned empty generation")
            except BackendError as exc:
                failure = exc
        if failure is not None:
            state.add_event(NODE_GENERATE, prompt, f"failed: {failure}")
            raise AgentTurnError(f"generation failed: {failure}", state.trace)
        if self.options.use_funcall:
            packed = build_query_input(
                persona,
                state.chat_history,
                state.question,
                detail_templates=self.options.detail_templates,
                persona_templates=self.options.persona_templates,
            )
            envelope = funcall_invoke(
                {"output": text, "query_input": packed},
                persona,
                detail_templates=self.options.detail_templates,
                persona_templates=self.options.persona_templates,
            )
            text = envelope.tool_input["response"]
        state.generation = text
        state.add_event(NODE_GENERATE, prompt, f"ok degraded={str(state.degraded).lower()}")
        return state

    def route_after_generation(self, state: GraphState) -> str:
        if not state.generation:
            raise ValueError("generation must be non-empty before routing")
        warnings: list[str] = []
        context = "\n\n".join(doc.text for doc in state.documents) or NO_CONTEXT_MARKER
        grounded = self._judge(
            self.options.grounded_template.format(context=context, answer=state.generation),
            "grounded",
            warnings,
        )
        addresses = self._judge(
            self.options.addresses_template.format(
                question=state.question, answer=state.generation
            ),
            "addresses",
            warnings,
        )
        if grounded and addresses:
            label, reason = ROUTE_END, "grounded and addresses"
        elif not grounded:
            if state.regen_count < self.limits.max_regens:
                state.regen_count += 1
                label = ROUTE_GENERATE
                reason = f"not grounded, regen {state.regen_count}/{self.limits.max_regens}"
            else:
                state.degraded = True
                label, reason = ROUTE_END, "not grounded, regen budget exhausted"
        else:
            if state.rewrite_count < self.limits.max_rewrites:
                label = ROUTE_TRANSFORM
                reason = "grounded but off-question"
            else:
                state.degraded = True
                label, reason = ROUTE_END, "off-question, rewrite budget exhausted"
        summary = (
            f"grounded={str(grounded).lower()} addresses={str(addresses).lower()}: {reason}"
        )
        if warnings:
            summary += f" warnings={json.dumps(warnings)}"
        state.add_event(NODE_ROUTE, summary, label)
        return label

    # -- driver -------------------------------------------------------

    def run_turn(
        self,
        question: str,
        chat_history: Sequence[tuple[str, str]] | None = None,
    ) -> tuple[str, list[TraceEvent], GraphState]:
        """Run one bounded question-answering turn. Returns the answer, the
        full trace, and the final state (with the new turn appended to
        chat_history)."""
        if not question:
            raise ValueError("question must be non-empty")
        state = GraphState(
            original_question=question,
            question=question,
            chat_history=list(chat_history or []),
        )
        bound = self.limits.node_execution_bound()

        def check_bound() -> None:
            executed = sum(1 for e in state.trace if e.node in EXEC_NODES)
            if executed > bound:
                raise AgentTurnError(
                    f"node execution bound {bound} exceeded", state.trace
                )

        while True:
            self.retrieve(state)
            self.grade_documents(state)
            check_bound()
            if self.route_after_grading(state) == ROUTE_TRANSFORM:
                self.transform_query(state)
                check_bound()
                continue
            while True:
                self.generate(state)
                check_bound()
                if state.degraded:
                    # Best-effort answer under an exhausted budget; judging
                    # it could only spend budget that no longer exists.
                    state.add_event(NODE_ROUTE, "degraded short-circuit", ROUTE_END)
                    label = ROUTE_END
                else:
                    label = self.route_after_generation(state)
                if label == ROUTE_END:
                    answer = state.generation or ""
                    state.chat_history.append((question, answer))
                    return answer, state.trace, state
                if label == ROUTE_TRANSFORM:
                    self.transform_query(state)
                    check_bound()
                    break
                # label == ROUTE_GENERATE: loop for a regeneration pass
