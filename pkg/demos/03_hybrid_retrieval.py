"""
Hybrid retrieval and context compression
========================================

Fuse BM25 and vector rankings with weighted reciprocal rank, then run
the compression pipeline: drop near-duplicate contexts, rerank the
survivors, and reorder them so the strongest sit at the edges of the
prompt where model attention is highest.
"""

import tempfile
from pathlib import Path

from ragforge.config import EngineConfig
from ragforge.engine import Engine

handbook = Path(__file__).parent / "data" / "handbook"

config = EngineConfig()
config.index.directory = str(Path(tempfile.mkdtemp()) / "index")
engine = Engine(config)
report = engine.ingest(handbook)
print(f"ingested {report.documents} documents, {report.chunks} chunks")

question = "What torque is specified for the caliper bracket bolts?"
print(f"\nquestion: {question}")

# Stage 1: weighted reciprocal-rank fusion of the BM25 and vector lists.
fused = engine.retrieve_fused(question)
print(f"\nfused candidates ({len(fused)}):")
for doc in fused[:5]:
    print(f"  rank {doc.rank} rrf {doc.score:.5f} {doc.chunk_id}")

# Stage 2: redundancy filter -> rerank -> lost-in-the-middle reorder.
compressed = engine.retrieve_compressed(question)
print(f"\ncompressed contexts ({len(compressed)}):")
for doc in compressed:
    print(f"  relevance {doc.relevance_score:.1f} {doc.chunk_id}")
    print(f"    {' '.join(doc.text.split())[:90]}")

# The best-reranked chunk lands first; the runner-up lands last. That is
# the lost-in-the-middle shape: strong contexts at both edges.
best = max(compressed, key=lambda d: d.relevance_score)
print(f"\nbest chunk {best.chunk_id} sits at position "
      f"{[d.chunk_id for d in compressed].index(best.chunk_id) + 1} of {len(compressed)}")
