"""Chunking, the flat cosine-similarity vector index, and its on-disk format.

The index directory holds three files:
    manifest.json   format version, dimension, counts, chunking config
    chunks.jsonl    one chunk record per line
    embeddings.f32  row-major 32-bit little-endian floats, dim per manifest

Persistence is atomic: a new index is written to a temp directory and
swapped into place, so readers never observe a partial write. BM25
statistics are rebuilt from the chunks on load rather than stored.
"""

from __future__ import annotations

import json
import os
import shutil
import uuid
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .retrieval import ScoredDoc
from .text import tokenize_with_spans

FORMAT_VERSION = 1

DEFAULT_CHUNK_SIZE = 512
DEFAULT_OVERLAP = 64


class VectorIndexError(Exception):
    """Index construction or persistence failure."""


class IndexFormatError(VectorIndexError):
    """Persisted index is unreadable, corrupt, or from an unknown version."""


@dataclass
class Chunk:
    """A fixed-length token window of one source document.

    token_span is (start, end) in token units over the source document's
    token sequence; text is the exact substring covering those tokens.
    """

    id: str
    doc_id: str
    text: str
    token_span: tuple[int, int]


@dataclass
class IndexManifest:
    format_version: int
    embedding_dim: int
    chunk_count: int
    chunk_size: int
    overlap: int
    embedding_model: str = "mock-fnv1a-256"
    generation_model: str = ""


def chunk_text(
    text: str,
    *,
    doc_id: str = "doc",
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    """Split text into overlapping fixed-length token windows.

    Windows start every (chunk_size - overlap) tokens; the last window may
    be short. Empty text yields no chunks.
    """
    if chunk_size <= overlap or overlap < 0:
        raise ValueError(
            f"chunk_size ({chunk_size}) must exceed overlap ({overlap}) and overlap must be >= 0"
        )
    spans = tokenize_with_spans(text)
    total = len(spans)
    if total == 0:
        return []
    stride = chunk_size - overlap
    chunks: list[Chunk] = []
    start = 0
    ordinal = 0
    while start < total:
        end = min(start + chunk_size, total)
        char_start = spans[start][1]
        char_end = spans[end - 1][2]
        chunks.append(
            Chunk(
                id=f"{doc_id}#{ordinal:05d}",
                doc_id=doc_id,
                text=text[char_start:char_end],
                token_span=(start, end),
            )
        )
        ordinal += 1
        if end == total:
            break
        start += stride
    return chunks


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|); rejects dimension mismatches and zero vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


class VectorIndex:
    """Flat cosine index over chunks; exact search, no ANN structures."""

    def __init__(
        self,
        dim: int,
        *,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
        embedding_model: str = "mock-fnv1a-256",
        generation_model: str = "",
    ):
        if dim <= 0:
            raise VectorIndexError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self.chunks: list[Chunk] = []
        self._matrix = np.zeros((0, dim), dtype=np.float32)
        self._manifest_extra = {
            "chunk_size": chunk_size,
            "overlap": overlap,
            "embedding_model": embedding_model,
            "generation_model": generation_model,
        }

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def manifest(self) -> IndexManifest:
        return IndexManifest(
            format_version=FORMAT_VERSION,
            embedding_dim=self.dim,
            chunk_count=len(self.chunks),
            **self._manifest_extra,
        )

    def add(self, chunk: Chunk, embedding: np.ndarray) -> None:
        self.add_many([chunk], [embedding])

    def add_many(self, chunks: list[Chunk], embeddings: list[np.ndarray]) -> None:
        if len(chunks) != len(embeddings):
            raise VectorIndexError(f"{len(chunks)} chunks but {len(embeddings)} embeddings")
        if not chunks:
            return
        seen = {c.id for c in self.chunks}
        rows = []
        for chunk, embedding in zip(chunks, embeddings):
            vec = np.asarray(embedding, dtype=np.float32).ravel()
            if vec.shape[0] != self.dim:
                raise VectorIndexError(
                    f"embedding dim {vec.shape[0]} does not match index dim {self.dim}"
                )
            if chunk.id in seen:
                raise VectorIndexError(f"duplicate chunk id {chunk.id!r}")
            seen.add(chunk.id)
            rows.append(vec)
        self.chunks.extend(chunks)
        self._matrix = np.vstack([self._matrix, np.stack(rows)])

    def search(self, query_vec: np.ndarray, k: int) -> list[ScoredDoc]:
        """Top-k chunks by cosine similarity, descending; ties break by
        chunk id ascending; ranks run 1..len(results)."""
        if k <= 0 or not self.chunks:
            return []
        q = np.asarray(query_vec, dtype=np.float64).ravel()
        if q.shape[0] != self.dim:
            raise VectorIndexError(f"query dim {q.shape[0]} does not match index dim {self.dim}")
        qnorm = np.linalg.norm(q)
        if qnorm == 0.0:
            raise VectorIndexError("query embedding is a zero vector")
        matrix = self._matrix.astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1)
        norms[norms == 0.0] = 1.0  # zero rows score 0, never divide by 0
        sims = (matrix @ q) / (norms * qnorm)
        sims = np.clip(sims, -1.0, 1.0)
        order = sorted(range(len(self.chunks)), key=lambda i: (-sims[i], self.chunks[i].id))
        return [
            ScoredDoc(
                chunk_id=self.chunks[i].id,
                text=self.chunks[i].text,
                score=float(sims[i]),
                rank=r,
            )
            for r, i in enumerate(order[:k], start=1)
        ]

    # -- persistence --------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        """Write the index atomically: build a sibling temp directory, then
        swap it into place."""
        target = Path(directory)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.parent / f".{target.name}.tmp-{uuid.uuid4().hex[:8]}"
        tmp.mkdir()
        try:
            (tmp / "manifest.json").write_text(
                json.dumps(asdict(self.manifest), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            with (tmp / "chunks.jsonl").open("w", encoding="utf-8") as fh:
                for chunk in self.chunks:
                    record = {
                        "id": chunk.id,
                        "doc_id": chunk.doc_id,
                        "text": chunk.text,
                        "token_span": list(chunk.token_span),
                    }
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            matrix = np.ascontiguousarray(self._matrix, dtype="<f4")
            (tmp / "embeddings.f32").write_bytes(matrix.tobytes())
            if target.exists():
                trash = target.parent / f".{target.name}.old-{uuid.uuid4().hex[:8]}"
                os.rename(target, trash)
                os.rename(tmp, target)
                shutil.rmtree(trash)
            else:
                os.rename(tmp, target)
        except Exception:
            shutil.rmtree(tmp, ignore_errors=True)
            raise

    @classmethod
    def load(cls, directory: str | Path) -> "VectorIndex":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            # A missing index is an expected state, not a corrupt one.
            raise FileNotFoundError(f"no index manifest at {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IndexFormatError(f"cannot read {manifest_path}: {exc}") from exc
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise IndexFormatError(
                f"{manifest_path}: unknown format_version {version!r} "
                f"(this build reads version {FORMAT_VERSION})"
            )
        dim = int(manifest["embedding_dim"])
        count = int(manifest["chunk_count"])
        index = cls(
            dim,
            chunk_size=int(manifest.get("chunk_size", DEFAULT_CHUNK_SIZE)),
            overlap=int(manifest.get("overlap", DEFAULT_OVERLAP)),
            embedding_model=manifest.get("embedding_model", ""),
            generation_model=manifest.get("generation_model", ""),
        )
        chunks_path = directory / "chunks.jsonl"
        chunks: list[Chunk] = []
        with chunks_path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IndexFormatError(f"{chunks_path}:{line_no}: bad record: {exc}") from exc
                chunks.append(
                    Chunk(
                        id=record["id"],
                        doc_id=record["doc_id"],
                        text=record["text"],
                        token_span=tuple(record["token_span"]),
                    )
                )
        if len(chunks) != count:
            raise IndexFormatError(
                f"{chunks_path}: manifest promises {count} chunks, found {len(chunks)}"
            )
        raw = (directory / "embeddings.f32").read_bytes()
        expected = count * dim * 4
        if len(raw) != expected:
            raise IndexFormatError(
                f"{directory / 'embeddings.f32'}: expected {expected} bytes "
                f"({count} x {dim} float32), found {len(raw)}"
            )
        index.chunks = chunks
        index._matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim).copy()
        return index
