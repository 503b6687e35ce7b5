"""
Self-reflective agent walkthrough
=================================

Run one agent turn and print the full decision trace: retrieval, per-
document grading, routing, generation, and the answer-quality checks.
Then force the unhappy path with a judge that rejects everything, and
watch the agent spend its rewrite budget and degrade gracefully.
"""

import tempfile
from pathlib import Path

from ragforge.backend import MockBackend, ScriptRule
from ragforge.config import EngineConfig
from ragforge.engine import Engine

handbook = Path(__file__).parent / "data" / "handbook"


def print_trace(trace):
    for event in trace:
        summary = " ".join(event.summary.split())
        print(f"  {event.node:16s} -> {event.outcome:20s} {summary[:70]}")


config = EngineConfig()
config.index.directory = str(Path(tempfile.mkdtemp()) / "index")
engine = Engine(config)
engine.ingest(handbook)

# Happy path: every judge cooperates, so the graph runs
# retrieve -> grade -> route -> generate -> route(end).
result = engine.agent_turn("What is the correct spark plug gap?")
print(f"answer: {result.answer}")
print(f"degraded: {result.degraded}")
print("trace:")
print_trace(result.trace)

# Unhappy path: a judge that calls every document irrelevant. The agent
# rewrites the query three times (its full budget), then answers anyway
# with no context and flags the turn degraded.
stubborn = MockBackend(
    [
        ScriptRule(contains='"relevant"', response='{"relevant": false}'),
        ScriptRule(
            contains="Return only the rewritten question.",
            response="spark plug electrode gap specification",
        ),
        ScriptRule(contains=None, response="I could not find this in the handbook."),
    ]
)
engine_hostile = Engine(config, backend=stubborn)
engine_hostile.load_index()
result = engine_hostile.agent_turn("What is the correct spark plug gap?")
print(f"\nhostile-judge answer: {result.answer}")
print(f"degraded: {result.degraded}")
print("trace:")
print_trace(result.trace)
rewrites = sum(1 for e in result.trace if e.node == "transform_query")
print(f"\nthe agent spent {rewrites} query rewrites before degrading")
