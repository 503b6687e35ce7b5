"""
Live directional check: advanced vs naive retrieval
===================================================

Against a live Ollama-compatible server, hybrid retrieval plus context
compression should not score worse on answer relevancy than plain
vector search. This is a directional report, not a hard gate; it needs
a running server and is skipped otherwise.

Usage:
    RAGFORGE_BACKEND_URL=http://localhost:11434 python3 demos/07_live_directional.py
"""

import os
import sys
import tempfile
from pathlib import Path

import requests

from ragforge.config import config_from_dict
from ragforge.engine import Engine

base_url = os.environ.get("RAGFORGE_BACKEND_URL", "")
if not base_url:
    print("RAGFORGE_BACKEND_URL is not set; nothing to check against.")
    sys.exit(0)
try:
    requests.get(base_url, timeout=5)
except requests.RequestException as exc:
    print(f"backend at {base_url} is unreachable ({exc}); skipping.")
    sys.exit(0)

here = Path(__file__).parent
config = config_from_dict({"backend": {"mode": "http", "base_url": base_url}})
config.index.directory = str(Path(tempfile.mkdtemp()) / "index")

engine = Engine(config)
report = engine.ingest(here / "data" / "handbook")
print(f"ingested {report.documents} documents against {base_url}")

dataset = here / "data" / "sample_eval.jsonl"
naive = engine.evaluate(dataset, pipeline="naive")
advanced = engine.evaluate(dataset, pipeline="advanced")

naive_ar = naive.aggregates["answer_relevancy"]
advanced_ar = advanced.aggregates["answer_relevancy"]
print(f"\nanswer relevancy, naive:    {naive_ar:.4f}")
print(f"answer relevancy, advanced: {advanced_ar:.4f}")
if advanced_ar >= naive_ar:
    print("direction holds: advanced >= naive")
else:
    print("direction did NOT hold on this run (live model variance)")
