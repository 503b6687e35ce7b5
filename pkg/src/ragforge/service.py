"""HTTP service over the engine.

Endpoints:
  POST /api/ingest                 {path} -> ingest report
  POST /api/sessions               {pipeline?} -> {id, pipeline}
  POST /api/sessions/{id}/turns    {question} -> {answer, sources, degraded, trace_id}
  GET  /api/traces/{id}            -> {trace_id, events}
  POST /api/eval                   {dataset_path, pipeline?} -> metric report
  GET  /api/health                 -> {status, backend_mode, index_loaded}

Turns on one session are serialized by a per-session lock; distinct
sessions run concurrently. A directory of static files (the chat UI) can
be mounted at / without touching the API routes.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agent import AgentTurnError
from .backend import BackendError, TerminalBackendError
from .config import EngineConfig
from .engine import Engine, EngineError, SessionStore, TraceStore, UnknownSessionError
from .evalmetrics import EvalError


class IngestRequest(BaseModel):
    path: str


class SessionRequest(BaseModel):
    pipeline: str = "agent"


class TurnRequest(BaseModel):
    question: str


class EvalRequest(BaseModel):
    dataset_path: str
    pipeline: str = "advanced"


def create_app(
    config: EngineConfig | None = None,
    engine: Engine | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    config = config or EngineConfig()
    engine = engine or Engine(config)
    sessions = SessionStore()
    traces = TraceStore(retention=config.service.trace_retention)

    app = FastAPI(title="ragforge", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.sessions = sessions
    app.state.traces = traces

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "backend_mode": config.backend.mode,
            "index_loaded": engine.index_loaded,
        }

    @app.post("/api/ingest")
    def ingest(req: IngestRequest) -> dict:
        try:
            report = engine.ingest(req.path)
        except EngineError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return report.to_dict()

    @app.post("/api/sessions")
    def create_session(req: SessionRequest | None = None) -> dict:
        pipeline = req.pipeline if req is not None else "agent"
        try:
            session = sessions.create(pipeline)
        except EngineError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": session.id, "pipeline": session.pipeline, "created_at": session.created_at}

    @app.post("/api/sessions/{session_id}/turns")
    def post_turn(session_id: str, req: TurnRequest) -> dict:
        try:
            session = sessions.get(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if not req.question.strip():
            raise HTTPException(status_code=422, detail="question must be non-empty")
        with session.lock:
            try:
                result = engine.agent_turn(req.question, session.history, session.pipeline)
            except AgentTurnError as exc:
                trace_id = traces.put(exc.trace)
                raise HTTPException(
                    status_code=502,
                    detail={"message": str(exc), "trace_id": trace_id},
                )
            except (TerminalBackendError, BackendError) as exc:
                raise HTTPException(
                    status_code=502,
                    detail={"message": str(exc), "trace_id": None},
                )
            except EngineError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            session.history.append((req.question, result.answer))
            trace_id = traces.put(result.trace)
        return {
            "answer": result.answer,
            "sources": result.sources,
            "degraded": result.degraded,
            "trace_id": trace_id,
        }

    @app.get("/api/traces/{trace_id}")
    def get_trace(trace_id: str) -> dict:
        events = traces.get(trace_id)
        if events is None:
            raise HTTPException(status_code=404, detail=f"unknown trace: {trace_id}")
        return {"trace_id": trace_id, "events": events}

    @app.post("/api/eval")
    def run_eval(req: EvalRequest) -> dict:
        try:
            report = engine.evaluate(req.dataset_path, req.pipeline)
        except (EngineError, EvalError, FileNotFoundError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return report.to_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
