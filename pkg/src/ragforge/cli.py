"""Command-line interface.

Subcommands: convert (PDF/fixture -> Markdown), ingest (build an index),
query (one-shot answer), chat (terminal REPL), eval (metric report over a
JSONL dataset), serve (HTTP service). The chat REPL and the HTTP service
drive the identical engine code path.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .backend import BackendError
from .config import ConfigError, EngineConfig, load_config
from .engine import PIPELINES, Engine, EngineError
from .evalmetrics import EvalError
from .layout import LayoutError, convert_document


def _load_config(args: argparse.Namespace) -> EngineConfig:
    config = load_config(getattr(args, "config", None))
    index_dir = getattr(args, "index", None)
    if index_dir:
        config.index.directory = index_dir
    return config


def cmd_convert(args: argparse.Namespace) -> int:
    stats = convert_document(args.input, args.output)
    print(
        f"wrote {args.output}: {stats.pages} pages, {stats.elements} elements, "
        f"{stats.tables} tables, {stats.output_bytes} bytes"
    )
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    engine = Engine(_load_config(args))
    report = engine.ingest(args.source)
    print(
        f"indexed {report.documents} documents into {report.chunks} chunks "
        f"in {report.duration_seconds:.2f}s"
    )
    for item in report.errors:
        print(f"failed: {item['file']}: {item['error']}", file=sys.stderr)
    return 0 if not report.errors else 1


def _print_sources(docs) -> None:
    for doc in docs:
        score = doc.relevance_score
        shown = f"{score:.3f}" if score is not None else "-"
        snippet = " ".join(doc.text.split())[:100]
        print(f"  [{doc.rank}] {doc.chunk_id} (relevance {shown}): {snippet}")


def cmd_query(args: argparse.Namespace) -> int:
    engine = Engine(_load_config(args))
    answer, docs = engine.answer(args.question, args.pipeline)
    print(answer)
    if docs:
        print("\nsources:")
        _print_sources(docs)
    return 0


def cmd_chat(args: argparse.Namespace) -> int:
    engine = Engine(_load_config(args))
    history: list[tuple[str, str]] = []
    print("chat REPL; empty line or 'exit' to quit")
    while True:
        try:
            question = input("> ").strip()
        except EOFError:
            print()
            return 0
        if not question or question in ("exit", "quit"):
            return 0
        try:
            result = engine.agent_turn(question, history, args.pipeline)
        except (EngineError, BackendError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        history.append((question, result.answer))
        marker = " [degraded]" if result.degraded else ""
        print(f"{result.answer}{marker}")
        for source in result.sources:
            score = source["relevance_score"]
            shown = f"{score:.3f}" if score is not None else "-"
            print(f"  source {source['chunk_id']} (relevance {shown})")


def cmd_eval(args: argparse.Namespace) -> int:
    engine = Engine(_load_config(args))
    report = engine.evaluate(args.dataset, args.pipeline)
    rendered = report.to_markdown() if args.format == "markdown" else report.to_json()
    if args.output:
        Path(args.output).write_text(rendered + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(rendered)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args)
    static_dir = args.static_dir
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    app = create_app(config, static_dir=static_dir)
    host = args.host or config.service.host
    port = args.port if args.port is not None else config.service.port
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragforge",
        description="Retrieval-augmented generation engine for technical PDF corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="convert a PDF or fixture page file to Markdown")
    p_convert.add_argument("input", help="input .pdf or .json page-model file")
    p_convert.add_argument("output", help="output .md path")
    p_convert.set_defaults(func=cmd_convert)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--index", help="index directory (overrides config)")

    p_ingest = sub.add_parser("ingest", help="convert, chunk, embed, and index a document tree")
    p_ingest.add_argument("source", help="file or directory of .pdf/.json sources")
    add_common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_query = sub.add_parser("query", help="answer one question against the index")
    p_query.add_argument("question")
    p_query.add_argument("--pipeline", choices=PIPELINES, default="advanced")
    add_common(p_query)
    p_query.set_defaults(func=cmd_query)

    p_chat = sub.add_parser("chat", help="interactive REPL with conversation history")
    p_chat.add_argument("--pipeline", choices=("agent", "agent+funcall"), default="agent")
    add_common(p_chat)
    p_chat.set_defaults(func=cmd_chat)

    p_eval = sub.add_parser("eval", help="score a JSONL dataset with the four metrics")
    p_eval.add_argument("--dataset", required=True, help="JSONL dataset path")
    p_eval.add_argument("--pipeline", choices=PIPELINES, default="advanced")
    p_eval.add_argument("--format", choices=("json", "markdown"), default="json")
    p_eval.add_argument("--output", help="write the report here instead of stdout")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--static-dir", default=None, help="directory of UI files to serve at /")
    add_common(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EngineError, ConfigError, EvalError, LayoutError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
