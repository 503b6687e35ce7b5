"""Engine: wires layout conversion, indexing, hybrid retrieval, the agent,
and evaluation behind one object the CLI and HTTP service both drive.

Four answer pipelines are exposed under stable names:
  naive          vector search only, direct generation
  advanced       hybrid BM25+vector fusion, compression, direct generation
  agent          self-reflective graph over the advanced retriever
  agent+funcall  the agent with tool-call envelope wrapping
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .agent import AgenticRag, AgentLimits, AgentOptions, TraceEvent
from .backend import (
    Backend,
    BackendConfig,
    GenRequest,
    MockBackend,
    OllamaBackend,
    RetryPolicy,
    token_overlap_score,
)
from .config import EngineConfig
from .evalmetrics import (
    BackendJudge,
    EvalTooling,
    MetricReport,
    SubstringJudge,
    backend_question_generator,
    evaluate_dataset,
    load_dataset,
)
from .funcall import PersonaConfig, build_generation_prompt
from .index import VectorIndex, chunk_text
from .layout import extract_pages, render_document_markdown
from .retrieval import (
    Bm25Index,
    Bm25Params,
    CompressionConfig,
    FusionConfig,
    ScoredDoc,
    compress_contexts,
    rrf_fuse,
)

logger = logging.getLogger(__name__)

PIPELINES = ("naive", "advanced", "agent", "agent+funcall")
SOURCE_SUFFIXES = (".pdf", ".json")
SNIPPET_CHARS = 240


class EngineError(Exception):
    pass


class UnknownSessionError(EngineError):
    pass


@dataclass
class IngestReport:
    documents: int
    chunks: int
    duration_seconds: float
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "chunks": self.chunks,
            "duration_seconds": self.duration_seconds,
            "errors": self.errors,
        }


@dataclass
class TurnResult:
    answer: str
    sources: list[dict]
    degraded: bool
    trace: list[TraceEvent]


def build_backend(config: EngineConfig) -> Backend:
    section = config.backend
    if section.mode == "mock":
        return MockBackend(retry=RetryPolicy(section.max_attempts, 0.0))
    return OllamaBackend(
        BackendConfig(
            base_url=section.base_url,
            generation_model=section.generation_model,
            embedding_model=section.embedding_model,
            rerank_url=section.rerank_url or None,
            timeout_seconds=section.timeout_seconds,
            retry=RetryPolicy(section.max_attempts, section.backoff_seconds),
        )
    )


def source_as_dict(doc: ScoredDoc) -> dict:
    return {
        "chunk_id": doc.chunk_id,
        "snippet": doc.text[:SNIPPET_CHARS],
        "relevance_score": doc.relevance_score,
    }


class Engine:
    def __init__(self, config: EngineConfig | None = None, backend: Backend | None = None):
        self.config = config or EngineConfig()
        self.backend = backend or build_backend(self.config)
        self._index: VectorIndex | None = None
        self._bm25: Bm25Index | None = None
        # Ingestion swaps the whole index; retrieval only reads under it.
        self._index_lock = threading.RLock()

    # -- ingestion ----------------------------------------------------

    @property
    def index_dir(self) -> Path:
        return Path(self.config.index.directory)

    def _source_files(self, source: Path) -> list[Path]:
        if source.is_file():
            return [source]
        return sorted(
            p for p in source.rglob("*")
            if p.is_file() and p.suffix.lower() in SOURCE_SUFFIXES
        )

    def ingest(self, source: str | Path, index_dir: str | Path | None = None) -> IngestReport:
        """Convert every PDF/fixture page file under source to Markdown,
        chunk, embed, and atomically persist a fresh index. Files that fail
        are reported individually; the rest are still indexed."""
        started = time.monotonic()
        src = Path(source)
        if not src.exists():
            raise EngineError(f"source path does not exist: {src}")
        target = Path(index_dir) if index_dir is not None else self.index_dir
        chunk_size = self.config.index.chunk_size
        overlap = self.config.index.overlap

        errors: list[dict] = []
        chunks = []
        embeddings = []
        documents = 0
        files = self._source_files(src)
        for path in files:
            doc_id = path.relative_to(src).as_posix() if src.is_dir() else path.name
            try:
                pages = extract_pages(path)
                markdown = render_document_markdown(pages)
                doc_chunks = chunk_text(
                    markdown, doc_id=doc_id, chunk_size=chunk_size, overlap=overlap
                )
                doc_embeddings = [self.backend.embed(c.text) for c in doc_chunks]
            except Exception as exc:
                errors.append({"file": str(path), "error": str(exc)})
                continue
            chunks.extend(doc_chunks)
            embeddings.extend(doc_embeddings)
            documents += 1

        dim = embeddings[0].shape[0] if embeddings else self.backend.embed("dimension probe").shape[0]
        model_name = (
            self.config.backend.embedding_model
            if self.config.backend.mode == "http"
            else "mock-fnv1a-256"
        )
        index = VectorIndex(
            dim,
            chunk_size=chunk_size,
            overlap=overlap,
            embedding_model=model_name,
            generation_model=self.config.backend.generation_model
            if self.config.backend.mode == "http"
            else "mock-script",
        )
        index.add_many(chunks, embeddings)
        with self._index_lock:
            index.save(target)
            self._install_index(index)
        return IngestReport(
            documents=documents,
            chunks=len(chunks),
            duration_seconds=time.monotonic() - started,
            errors=errors,
        )

    def _install_index(self, index: VectorIndex) -> None:
        self._index = index
        self._bm25 = Bm25Index(
            [(c.id, c.text) for c in index.chunks],
            Bm25Params(k1=self.config.retrieval.bm25.k1, b=self.config.retrieval.bm25.b),
        )

    def load_index(self, index_dir: str | Path | None = None) -> None:
        target = Path(index_dir) if index_dir is not None else self.index_dir
        with self._index_lock:
            try:
                index = VectorIndex.load(target)
            except FileNotFoundError as exc:
                raise EngineError(
                    f"no index at {target}; run ingest first"
                ) from exc
            self._install_index(index)

    @property
    def index_loaded(self) -> bool:
        return self._index is not None

    def _require_index(self) -> tuple[VectorIndex, Bm25Index]:
        with self._index_lock:
            if self._index is None:
                self.load_index()
            assert self._index is not None and self._bm25 is not None
            return self._index, self._bm25

    # -- retrieval ----------------------------------------------------

    def retrieve_fused(self, question: str) -> list[ScoredDoc]:
        """Hybrid retrieval: BM25 and vector ranked lists fused by weighted
        reciprocal rank."""
        index, bm25 = self._require_index()
        cfg = self.config.retrieval
        bm25_hits = bm25.search(question, cfg.bm25_top_k)
        vector_hits = index.search(self.backend.embed(question), cfg.vector_top_k)
        return rrf_fuse(
            [bm25_hits, vector_hits],
            FusionConfig(weights=tuple(cfg.weights), rrf_k=cfg.rrf_k),
        )

    def _rerank_scorer(self):
        if self.config.backend.mode == "http" and not self.config.backend.rerank_url:
            # No rerank sidecar configured; fall back to the deterministic
            # lexical scorer rather than failing the whole pipeline.
            logger.debug("no rerank endpoint configured; using lexical overlap scorer")
            return token_overlap_score
        return self.backend.rerank_score

    def retrieve_compressed(self, question: str) -> list[ScoredDoc]:
        fused = self.retrieve_fused(question)
        if not fused:
            return []
        cfg = self.config.retrieval
        return compress_contexts(
            question,
            fused,
            CompressionConfig(
                redundancy_threshold=cfg.redundancy_threshold,
                rerank_top_n=cfg.rerank_top_n,
            ),
            scorer=self._rerank_scorer(),
            embedder=self.backend.embed,
        )

    # -- answering ----------------------------------------------------

    def _persona(self) -> PersonaConfig:
        return PersonaConfig(
            persona=self.config.agent.persona, language=self.config.agent.language
        )

    def _direct_answer(
        self,
        question: str,
        docs: Sequence[ScoredDoc],
        history: Sequence[tuple[str, str]] = (),
    ) -> str:
        prompt = build_generation_prompt(
            self._persona(),
            history,
            question,
            [d.text for d in docs],
            detail_templates=self.config.funcall.detail_templates,
            persona_templates=self.config.funcall.persona_templates,
        )
        response = self.backend.generate(
            GenRequest(
                prompt=prompt,
                temperature=self.config.agent.temperature,
                seed=self.config.agent.seed,
            )
        )
        return response.text.strip()

    def _build_agent(self, use_funcall: bool) -> AgenticRag:
        return AgenticRag(
            self.retrieve_compressed,
            self.backend,
            AgentLimits(
                max_rewrites=self.config.agent.max_rewrites,
                max_regens=self.config.agent.max_regens,
            ),
            AgentOptions(
                persona=self._persona(),
                use_funcall=use_funcall,
                temperature=self.config.agent.temperature,
                seed=self.config.agent.seed,
                detail_templates=self.config.funcall.detail_templates,
                persona_templates=self.config.funcall.persona_templates,
            ),
        )

    def agent_turn(
        self,
        question: str,
        history: Sequence[tuple[str, str]] = (),
        pipeline: str = "agent",
    ) -> TurnResult:
        if pipeline not in ("agent", "agent+funcall"):
            raise EngineError(f"chat pipeline must be agent or agent+funcall, got {pipeline!r}")
        agent = self._build_agent(use_funcall=pipeline == "agent+funcall")
        answer, trace, state = agent.run_turn(question, history)
        return TurnResult(
            answer=answer,
            sources=[source_as_dict(d) for d in state.documents],
            degraded=state.degraded,
            trace=trace,
        )

    def answer(self, question: str, pipeline: str = "advanced") -> tuple[str, list[ScoredDoc]]:
        """One-shot answer with no session history. Returns the answer and
        the context documents it was generated from."""
        if pipeline not in PIPELINES:
            raise EngineError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
        if pipeline == "naive":
            index, _ = self._require_index()
            docs = index.search(
                self.backend.embed(question), self.config.retrieval.final_top_k
            )
            return self._direct_answer(question, docs), docs
        if pipeline == "advanced":
            docs = self.retrieve_compressed(question)
            return self._direct_answer(question, docs), docs
        result = self.agent_turn(question, (), pipeline)
        docs = [
            ScoredDoc(
                chunk_id=s["chunk_id"],
                text=s["snippet"],
                score=0.0,
                rank=r,
                relevance_score=s["relevance_score"],
            )
            for r, s in enumerate(result.sources, start=1)
        ]
        return result.answer, docs

    # -- evaluation ---------------------------------------------------

    def _eval_tooling(self) -> EvalTooling:
        if self.config.backend.mode == "http":
            return EvalTooling(
                judge=BackendJudge(self.backend),
                embedder=self.backend.embed,
                question_generator=backend_question_generator(self.backend),
                questions_per_answer=self.config.eval.questions_per_answer,
            )
        # Offline: substring judge plus an answer-echo question generator,
        # so answer_relevancy measures question/answer lexical closeness
        # deterministically instead of pinning at 1.0.
        return EvalTooling(
            judge=SubstringJudge(),
            embedder=self.backend.embed,
            question_generator=lambda answer, n: [answer] * n,
            questions_per_answer=self.config.eval.questions_per_answer,
        )

    def evaluate(self, dataset_path: str | Path, pipeline: str = "advanced") -> MetricReport:
        if pipeline not in PIPELINES:
            raise EngineError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
        records = load_dataset(str(dataset_path))

        def run(question: str) -> tuple[str, list[str]]:
            answer, docs = self.answer(question, pipeline)
            return answer, [d.text for d in docs]

        return evaluate_dataset(records, self._eval_tooling(), run)


# ---------------------------------------------------------------------------
# Session and trace bookkeeping for the service layer
# ---------------------------------------------------------------------------


@dataclass
class Session:
    id: str
    created_at: float
    pipeline: str
    history: list[tuple[str, str]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, pipeline: str = "agent") -> Session:
        if pipeline not in ("agent", "agent+funcall"):
            raise EngineError(
                f"session pipeline must be agent or agent+funcall, got {pipeline!r}"
            )
        session = Session(id=uuid.uuid4().hex, created_at=time.time(), pipeline=pipeline)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSessionError(f"unknown session: {session_id}") from None


class TraceStore:
    """Keeps the most recent traces in memory (oldest evicted first)."""

    def __init__(self, retention: int = 100):
        if retention < 1:
            raise ValueError("retention must be >= 1")
        self.retention = retention
        self._traces: OrderedDict[str, list[dict]] = OrderedDict()
        self._lock = threading.Lock()

    def put(self, trace: Sequence[TraceEvent]) -> str:
        trace_id = uuid.uuid4().hex
        with self._lock:
            self._traces[trace_id] = [event.to_dict() for event in trace]
            while len(self._traces) > self.retention:
                self._traces.popitem(last=False)
        return trace_id

    def get(self, trace_id: str) -> list[dict] | None:
        with self._lock:
            return self._traces.get(trace_id)
