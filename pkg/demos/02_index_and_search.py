"""
Chunking, embedding, and the flat vector index
==============================================

Chunk a document into overlapping token windows, embed each chunk, and
search the persisted index by cosine similarity. The mock embedder is a
deterministic token-hash bag, so this whole script runs offline.
"""

import tempfile
from pathlib import Path

from ragforge.backend import mock_embed
from ragforge.index import VectorIndex, chunk_text
from ragforge.layout import extract_pages, render_document_markdown

handbook = Path(__file__).parent / "data" / "handbook"

# Convert one handbook section and cut it into 64-token windows with
# 16 tokens of overlap so no sentence is lost at a boundary.
markdown = render_document_markdown(extract_pages(handbook / "brakes.json"))
chunks = chunk_text(markdown, doc_id="brakes.json", chunk_size=64, overlap=16)
print(f"{len(chunks)} chunks from brakes.json")
for chunk in chunks:
    print(f"  {chunk.id}: tokens [{chunk.token_span[0]}, {chunk.token_span[1]})")

# Build, persist, and reload the index. Saving is atomic: readers never
# observe a half-written directory.
index = VectorIndex(dim=256, chunk_size=64, overlap=16, embedding_model="mock-fnv1a-256")
index.add_many(chunks, [mock_embed(c.text) for c in chunks])
index_dir = Path(tempfile.mkdtemp()) / "demo-index"
index.save(index_dir)
print(f"\nsaved to {index_dir} ({[p.name for p in sorted(index_dir.iterdir())]})")

reloaded = VectorIndex.load(index_dir)
hits = reloaded.search(mock_embed("caliper bracket bolt torque"), k=3)
print("\ntop 3 for 'caliper bracket bolt torque':")
for hit in hits:
    print(f"  rank {hit.rank} score {hit.score:.4f} {hit.chunk_id}")
    print(f"    {' '.join(hit.text.split())[:90]}")
