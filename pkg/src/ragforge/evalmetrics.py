"""Four-metric RAG evaluation: context precision, context recall,
faithfulness, and answer relevancy.

Metrics are judge- and embedder-agnostic so the whole suite runs offline:
tests use a substring judge and the hash embedder, live runs can plug the
model backend in for both. Degenerate inputs (no contexts, no sentences,
no claims) score null and are excluded from aggregates rather than
counted as zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .backend import Backend, GenRequest
from .text import split_sentences, tokenize

logger = logging.getLogger(__name__)

METRIC_NAMES = (
    "context_precision",
    "context_recall",
    "faithfulness",
    "answer_relevancy",
)


class EvalError(Exception):
    pass


@dataclass
class EvalRecord:
    question: str
    ground_truth: str = ""
    contexts: list[str] = field(default_factory=list)
    answer: str = ""

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")


class Judge(Protocol):
    """Boolean verdicts for the three judged facets."""

    def relevant(self, question: str, context: str) -> bool: ...

    def attributable(self, context: str, statement: str) -> bool: ...

    def supported(self, context: str, claim: str) -> bool: ...


class SubstringJudge:
    """Deterministic test judge.

    Attribution and support are case-insensitive containment of the
    statement in the context. Relevance is shared-token overlap, since a
    whole context rarely contains a whole question verbatim."""

    def relevant(self, question: str, context: str) -> bool:
        q = set(tokenize(question.lower()))
        c = set(tokenize(context.lower()))
        return bool(q & c)

    def attributable(self, context: str, statement: str) -> bool:
        return statement.strip().lower() in context.lower()

    def supported(self, context: str, claim: str) -> bool:
        return self.attributable(context, claim)


RELEVANT_TEMPLATE = (
    "Question: {question}\n\nContext:\n{context}\n\n"
    'Is this context relevant to answering the question? Respond with JSON '
    'only: {{"relevant": true or false}}.'
)

ATTRIBUTABLE_TEMPLATE = (
    "Context:\n{context}\n\nStatement: {statement}\n\n"
    'Can the statement be attributed to the context? Respond with JSON only: '
    '{{"attributable": true or false}}.'
)

SUPPORTED_TEMPLATE = (
    "Context:\n{context}\n\nClaim: {claim}\n\n"
    'Is the claim supported by the context? Respond with JSON only: '
    '{{"supported": true or false}}.'
)

QUESTION_GEN_TEMPLATE = (
    "Answer:\n{answer}\n\n"
    "Write {n} distinct questions this answer would fully respond to. "
    'Respond with JSON only: {{"questions": ["...", "..."]}}.'
)


class BackendJudge:
    """Live judge: each verdict is one JSON-mode model call."""

    def __init__(self, backend: Backend):
        self.backend = backend

    def relevant(self, question: str, context: str) -> bool:
        prompt = RELEVANT_TEMPLATE.format(question=question, context=context)
        return self.backend.judge_bool(prompt, "relevant")

    def attributable(self, context: str, statement: str) -> bool:
        prompt = ATTRIBUTABLE_TEMPLATE.format(context=context, statement=statement)
        return self.backend.judge_bool(prompt, "attributable")

    def supported(self, context: str, claim: str) -> bool:
        prompt = SUPPORTED_TEMPLATE.format(context=context, claim=claim)
        return self.backend.judge_bool(prompt, "supported")


def echo_question_generator(question: str) -> Callable[[str, int], list[str]]:
    """Generator that ignores the answer and returns the original question
    n times; answer_relevancy becomes exactly 1.0."""

    def gen(answer: str, n: int) -> list[str]:
        return [question] * n

    return gen


def backend_question_generator(backend: Backend) -> Callable[[str, int], list[str]]:
    def gen(answer: str, n: int) -> list[str]:
        prompt = QUESTION_GEN_TEMPLATE.format(answer=answer, n=n)
        response = backend.generate(GenRequest(prompt=prompt, json_mode=True))
        payload = response.parsed
        if not isinstance(payload, dict) or not isinstance(payload.get("questions"), list):
            raise EvalError(f"question generator returned no questions: {response.text[:120]}")
        questions = [str(q) for q in payload["questions"] if str(q).strip()]
        if not questions:
            raise EvalError("question generator returned an empty list")
        return questions[:n]

    return gen


# ---------------------------------------------------------------------------
# The four metrics
# ---------------------------------------------------------------------------


def context_precision(contexts: Sequence[str], relevance: Sequence[bool]) -> float | None:
    """Rank-weighted precision: sum of precision@k over relevant positions,
    divided by the number of relevant contexts. Rewards putting relevant
    contexts early."""
    if len(contexts) != len(relevance):
        raise EvalError(
            f"{len(contexts)} contexts but {len(relevance)} relevance flags"
        )
    if not contexts:
        return None
    total_relevant = sum(1 for r in relevance if r)
    if total_relevant == 0:
        return 0.0
    score = 0.0
    seen_relevant = 0
    for k, rel in enumerate(relevance, start=1):
        if rel:
            seen_relevant += 1
            score += seen_relevant / k
    return score / total_relevant


def context_recall(ground_truth: str, contexts: Sequence[str], judge: Judge) -> float | None:
    """Fraction of ground-truth sentences attributable to the contexts."""
    sentences = split_sentences(ground_truth)
    if not sentences:
        return None
    combined = "\n".join(contexts)
    attributed = 0
    for sentence in sentences:
        try:
            if judge.attributable(combined, sentence):
                attributed += 1
        except Exception as exc:
            logger.warning("attribution judge failed on %r: %s", sentence[:60], exc)
    return attributed / len(sentences)


def faithfulness(answer: str, contexts: Sequence[str], judge: Judge) -> float | None:
    """Fraction of answer claims (one per sentence) the judge finds
    supported by the contexts."""
    claims = split_sentences(answer)
    if not claims:
        return None
    combined = "\n".join(contexts)
    supported = 0
    for claim in claims:
        try:
            if judge.supported(combined, claim):
                supported += 1
        except Exception as exc:
            logger.warning("support judge failed on %r: %s", claim[:60], exc)
    return supported / len(claims)


def answer_relevancy(
    question: str,
    answer: str,
    question_generator: Callable[[str, int], list[str]],
    embedder: Callable[[str], np.ndarray],
    n: int = 3,
) -> float:
    """Mean cosine similarity (clamped at zero) between the question and n
    questions regenerated from the answer."""
    if n < 1:
        raise EvalError("n must be >= 1")
    generated = question_generator(answer, n)
    if not generated:
        raise EvalError("question generator produced nothing")
    q_vec = np.asarray(embedder(question), dtype=np.float64)
    q_norm = np.linalg.norm(q_vec)
    if q_norm == 0.0:
        raise EvalError("question embedding has zero norm")
    total = 0.0
    for gen_q in generated:
        g_vec = np.asarray(embedder(gen_q), dtype=np.float64)
        g_norm = np.linalg.norm(g_vec)
        if g_norm == 0.0:
            raise EvalError(f"generated question embedding has zero norm: {gen_q!r}")
        cos = float(np.dot(q_vec, g_vec) / (q_norm * g_norm))
        total += max(0.0, cos)
    return total / len(generated)


# ---------------------------------------------------------------------------
# Dataset evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalTooling:
    judge: Judge
    embedder: Callable[[str], np.ndarray]
    question_generator: Callable[[str, int], list[str]] | None = None
    questions_per_answer: int = 3


@dataclass
class MetricReport:
    rows: list[dict]
    aggregates: dict[str, float | None]
    null_counts: dict[str, int]
    failed_count: int

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "aggregates": self.aggregates,
            "null_counts": self.null_counts,
            "failed_count": self.failed_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, raw: str) -> "MetricReport":
        data = json.loads(raw)
        return cls(
            rows=data["rows"],
            aggregates=data["aggregates"],
            null_counts=data["null_counts"],
            failed_count=data["failed_count"],
        )

    def to_markdown(self) -> str:
        lines = ["| Metric | Mean | Null rows |", "|---|---|---|"]
        for name in METRIC_NAMES:
            mean = self.aggregates.get(name)
            rendered = "n/a" if mean is None else f"{mean:.4f}"
            lines.append(f"| {name} | {rendered} | {self.null_counts.get(name, 0)} |")
        lines.append("")
        lines.append(f"Rows: {len(self.rows)} ({self.failed_count} failed)")
        return "\n".join(lines)


Pipeline = Callable[[str], tuple[str, list[str]]]


def _evaluate_record(record: EvalRecord, tooling: EvalTooling) -> dict:
    relevance = [tooling.judge.relevant(record.question, ctx) for ctx in record.contexts]
    generator = tooling.question_generator or echo_question_generator(record.question)
    return {
        "question": record.question,
        "context_precision": context_precision(record.contexts, relevance),
        "context_recall": context_recall(record.ground_truth, record.contexts, tooling.judge),
        "faithfulness": faithfulness(record.answer, record.contexts, tooling.judge),
        "answer_relevancy": answer_relevancy(
            record.question,
            record.answer,
            generator,
            tooling.embedder,
            tooling.questions_per_answer,
        )
        if record.answer
        else None,
        "failed": False,
        "error": None,
    }


def evaluate_dataset(
    records: Sequence[EvalRecord],
    tooling: EvalTooling,
    pipeline: Pipeline | None = None,
) -> MetricReport:
    """Score every record; records missing an answer or contexts are first
    run through the pipeline under test. A record whose pipeline run raises
    becomes a failed row, excluded from aggregates but counted."""
    if not records:
        raise EvalError("dataset is empty")
    rows: list[dict] = []
    for index, record in enumerate(records):
        try:
            if (not record.answer or not record.contexts) and pipeline is not None:
                answer, contexts = pipeline(record.question)
                record = EvalRecord(
                    question=record.question,
                    ground_truth=record.ground_truth,
                    contexts=list(contexts) if not record.contexts else record.contexts,
                    answer=answer if not record.answer else record.answer,
                )
            rows.append(_evaluate_record(record, tooling))
        except Exception as exc:
            logger.warning("record %d failed: %s", index, exc)
            rows.append(
                {
                    "question": record.question,
                    **{name: None for name in METRIC_NAMES},
                    "failed": True,
                    "error": str(exc),
                }
            )
    aggregates: dict[str, float | None] = {}
    null_counts: dict[str, int] = {}
    for name in METRIC_NAMES:
        values = [
            row[name] for row in rows if not row["failed"] and row[name] is not None
        ]
        aggregates[name] = (sum(values) / len(values)) if values else None
        null_counts[name] = sum(
            1 for row in rows if not row["failed"] and row[name] is None
        )
    failed_count = sum(1 for row in rows if row["failed"])
    return MetricReport(
        rows=rows,
        aggregates=aggregates,
        null_counts=null_counts,
        failed_count=failed_count,
    )


# ---------------------------------------------------------------------------
# Dataset file format
# ---------------------------------------------------------------------------


def _flatten_item(item: dict) -> list[EvalRecord]:
    if "turns" in item:
        records = []
        prefix_parts: list[str] = []
        for turn in item["turns"]:
            question = " ".join(prefix_parts + [turn["question"]])
            records.append(
                EvalRecord(
                    question=question,
                    ground_truth=turn.get("ground_truth", ""),
                    contexts=list(turn.get("contexts", [])),
                    answer=turn.get("answer", ""),
                )
            )
            prefix_parts.append(f"Q: {turn['question']}")
            reply = turn.get("ground_truth") or turn.get("answer") or ""
            if reply:
                prefix_parts.append(f"A: {reply}")
        return records
    return [
        EvalRecord(
            question=item["question"],
            ground_truth=item.get("ground_truth", ""),
            contexts=list(item.get("contexts", [])),
            answer=item.get("answer", ""),
        )
    ]


def load_dataset(path: str) -> list[EvalRecord]:
    """Read a JSON-lines dataset. Multi-turn items ({"turns": [...]}) are
    flattened to one record per turn with prior turns prepended to the
    question."""
    records: list[EvalRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                item = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvalError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(item, dict):
                raise EvalError(f"{path}:{line_no}: record must be an object")
            try:
                records.extend(_flatten_item(item))
            except (KeyError, ValueError) as exc:
                raise EvalError(f"{path}:{line_no}: {exc}") from exc
    return records
