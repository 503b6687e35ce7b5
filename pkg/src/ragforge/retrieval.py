"""Hybrid retrieval and context compression.

Okapi BM25 over the chunk corpus, weighted reciprocal-rank fusion of
ranked lists, and the three-stage compression pipeline applied to fused
candidates before prompting: redundancy filter, cross-encoder rerank,
lost-in-the-middle reorder.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .text import tokenize


class RetrievalError(Exception):
    pass


class RerankError(RetrievalError):
    """Scorer failure; carries the id of the document being scored."""

    def __init__(self, chunk_id: str, cause: Exception):
        super().__init__(f"reranker failed on document {chunk_id}: {cause}")
        self.chunk_id = chunk_id


@dataclass
class ScoredDoc:
    """A retrieved chunk with its score and 1-based rank.

    relevance_score is set by the reranker stage; retrieval stages leave
    it None.
    """

    chunk_id: str
    text: str
    score: float
    rank: int
    relevance_score: float | None = None


@dataclass
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class FusionConfig:
    weights: tuple[float, ...] = (0.5, 0.5)
    rrf_k: int = 60

    def __post_init__(self) -> None:
        self.weights = tuple(float(w) for w in self.weights)
        if any(w < 0 for w in self.weights):
            raise ValueError("fusion weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must sum to 1, got {sum(self.weights)}")
        if self.rrf_k < 1:
            raise ValueError(f"rrf_k must be >= 1, got {self.rrf_k}")


@dataclass
class CompressionConfig:
    redundancy_threshold: float = 0.95
    rerank_top_n: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.redundancy_threshold <= 1.0:
            raise ValueError("redundancy_threshold must be in (0, 1]")
        if self.rerank_top_n < 1:
            raise ValueError("rerank_top_n must be >= 1")


class Bm25Index:
    """Okapi BM25 over (chunk_id, text) pairs.

    IDF uses the +1-inside-log variant so scores stay non-negative:
    IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1). Text is lowercased
    before the shared tokenizer rule is applied. Statistics are cheap to
    rebuild, so they are never persisted.
    """

    def __init__(self, corpus: Sequence[tuple[str, str]], params: Bm25Params | None = None):
        self.params = params or Bm25Params()
        self.ids = [cid for cid, _ in corpus]
        self.texts = {cid: text for cid, text in corpus}
        self._tf = []
        self._lengths = []
        df: Counter[str] = Counter()
        for _, text in corpus:
            tokens = tokenize(text.lower())
            counts = Counter(tokens)
            self._tf.append(counts)
            self._lengths.append(len(tokens))
            df.update(counts.keys())
        n = len(self.ids)
        self._avgdl = (sum(self._lengths) / n) if n else 0.0
        self._idf = {
            t: math.log((n - d + 0.5) / (d + 0.5) + 1.0) for t, d in df.items()
        }

    def score_document(self, query_tokens: Sequence[str], doc_index: int) -> float:
        k1, b = self.params.k1, self.params.b
        tf = self._tf[doc_index]
        norm = k1 * (1.0 - b + b * self._lengths[doc_index] / self._avgdl)
        score = 0.0
        for t in query_tokens:
            f = tf.get(t)
            if not f:
                continue
            score += self._idf[t] * f * (k1 + 1.0) / (f + norm)
        return score

    def search(self, query: str, k: int) -> list[ScoredDoc]:
        """Top-k by BM25 score, descending; zero-score documents are not
        results; ties break by chunk id ascending."""
        if k <= 0 or not self.ids:
            return []
        query_tokens = tokenize(query.lower())
        hits = []
        for i, cid in enumerate(self.ids):
            s = self.score_document(query_tokens, i)
            if s > 0.0:
                hits.append((cid, s))
        hits.sort(key=lambda h: (-h[1], h[0]))
        return [
            ScoredDoc(chunk_id=cid, text=self.texts[cid], score=s, rank=r)
            for r, (cid, s) in enumerate(hits[:k], start=1)
        ]


def rrf_fuse(
    ranked_lists: Sequence[Sequence[ScoredDoc]],
    config: FusionConfig | None = None,
) -> list[ScoredDoc]:
    """Weighted reciprocal-rank fusion.

    fused(d) = sum over lists containing d of weight_i / (rrf_k + rank_i(d)),
    where rank is the 1-based position in that list. Sorted descending,
    ties by chunk id ascending, ranks reassigned 1..n.
    """
    config = config or FusionConfig()
    if len(config.weights) != len(ranked_lists):
        raise RetrievalError(
            f"{len(config.weights)} weights for {len(ranked_lists)} ranked lists"
        )
    fused: dict[str, float] = {}
    texts: dict[str, str] = {}
    for weight, docs in zip(config.weights, ranked_lists):
        for position, doc in enumerate(docs, start=1):
            fused[doc.chunk_id] = fused.get(doc.chunk_id, 0.0) + weight / (
                config.rrf_k + position
            )
            texts.setdefault(doc.chunk_id, doc.text)
    order = sorted(fused.items(), key=lambda item: (-item[1], item[0]))
    return [
        ScoredDoc(chunk_id=cid, text=texts[cid], score=s, rank=r)
        for r, (cid, s) in enumerate(order, start=1)
    ]


def redundancy_filter(
    docs: Sequence[ScoredDoc],
    embeddings: Sequence[np.ndarray],
    threshold: float = 0.95,
) -> list[ScoredDoc]:
    """Greedy near-duplicate removal in rank order.

    A document is dropped iff its cosine similarity to any already-kept
    document is >= threshold; survivors keep their relative order.
    """
    if len(docs) != len(embeddings):
        raise RetrievalError(
            f"{len(docs)} docs but {len(embeddings)} embeddings"
        )
    kept: list[ScoredDoc] = []
    kept_vecs: list[np.ndarray] = []
    for doc, vec in zip(docs, embeddings):
        v = np.asarray(vec, dtype=np.float64)
        norm = np.linalg.norm(v)
        duplicate = False
        for other in kept_vecs:
            sim = float(v @ other) / (norm * float(np.linalg.norm(other)))
            if sim >= threshold:
                duplicate = True
                break
        if not duplicate:
            kept.append(doc)
            kept_vecs.append(v)
    return kept


def litm_reorder(docs: Sequence[ScoredDoc]) -> list[ScoredDoc]:
    """Lost-in-the-middle reorder: reverse the relevance-ordered list, then
    alternate even positions to the front and odd positions to the back.
    The best documents end up at the extremes of the prompt, the worst in
    the middle. Fields are untouched; only positions change.
    """
    reordered: list[ScoredDoc] = []
    for i, doc in enumerate(reversed(list(docs))):
        if i % 2 == 0:
            reordered.insert(0, doc)
        else:
            reordered.append(doc)
    return reordered


def rerank_top_n(
    query: str,
    docs: Sequence[ScoredDoc],
    top_n: int,
    scorer: Callable[[str, str], float],
) -> list[ScoredDoc]:
    """Score every (query, doc) pair, keep the top_n by score descending.

    Survivors carry the scorer's value in both score and relevance_score
    and get fresh ranks. Ties keep input order (stable sort).
    """
    scored = []
    for doc in docs:
        try:
            s = float(scorer(query, doc.text))
        except Exception as exc:
            raise RerankError(doc.chunk_id, exc) from exc
        scored.append((doc, s))
    scored.sort(key=lambda pair: -pair[1])
    out = []
    for r, (doc, s) in enumerate(scored[:top_n], start=1):
        out.append(replace(doc, score=s, rank=r, relevance_score=s))
    return out


def compress_contexts(
    query: str,
    candidates: Sequence[ScoredDoc],
    config: CompressionConfig,
    *,
    scorer: Callable[[str, str], float],
    embedder: Callable[[str], np.ndarray],
) -> list[ScoredDoc]:
    """Full compression pipeline over fused retrieval output:
    redundancy filter, then rerank to top_n, then lost-in-the-middle
    reorder (prompt placement, so it must come last).
    """
    if not candidates:
        return []
    embeddings = [embedder(doc.text) for doc in candidates]
    survivors = redundancy_filter(candidates, embeddings, config.redundancy_threshold)
    reranked = rerank_top_n(query, survivors, config.rerank_top_n, scorer)
    return litm_reorder(reranked)
