"""Hierarchical engine configuration.

One JSON file configures every module. Every key has a default and the
defaults run fully offline against the mock backend; unknown keys are
rejected at load so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any

from .funcall import DEFAULT_DETAIL_TEMPLATES, DEFAULT_PERSONA_TEMPLATES, DETAIL_LEVELS, TOOL_NAME


class ConfigError(Exception):
    pass


@dataclass
class Bm25Section:
    k1: float = 1.5
    b: float = 0.75


@dataclass
class IndexSection:
    chunk_size: int = 512
    overlap: int = 64
    directory: str = "index"


@dataclass
class RetrievalSection:
    bm25: Bm25Section = field(default_factory=Bm25Section)
    bm25_top_k: int = 10
    vector_top_k: int = 10
    weights: list[float] = field(default_factory=lambda: [0.5, 0.5])
    rrf_k: int = 60
    redundancy_threshold: float = 0.95
    rerank_top_n: int = 5
    final_top_k: int = 5


@dataclass
class AgentSection:
    max_rewrites: int = 3
    max_regens: int = 2
    persona: str = "a helpful technical assistant"
    language: str = "en"
    temperature: float = 0.0
    seed: int = 0


@dataclass
class FuncallSection:
    tool_name: str = TOOL_NAME
    detail_templates: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_DETAIL_TEMPLATES)
    )
    persona_templates: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_PERSONA_TEMPLATES)
    )


@dataclass
class EvalSection:
    questions_per_answer: int = 3


@dataclass
class BackendSection:
    mode: str = "mock"  # "mock" or "http"
    base_url: str = "http://localhost:11434"
    generation_model: str = "llama3"
    embedding_model: str = "nomic-embed-text"
    rerank_url: str = ""
    timeout_seconds: float = 60.0
    max_attempts: int = 3
    backoff_seconds: float = 0.5


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8000
    trace_retention: int = 100


@dataclass
class EngineConfig:
    index: IndexSection = field(default_factory=IndexSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    agent: AgentSection = field(default_factory=AgentSection)
    funcall: FuncallSection = field(default_factory=FuncallSection)
    eval: EvalSection = field(default_factory=EvalSection)
    backend: BackendSection = field(default_factory=BackendSection)
    service: ServiceSection = field(default_factory=ServiceSection)


def _apply(target: Any, data: dict, path: str) -> None:
    known = {f.name: f for f in fields(target)}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(f"unknown config key: {here}")
        current = getattr(target, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be an object")
            _apply(current, value, here)
        elif isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be an object")
            if key == "detail_templates":
                bad = set(value) - set(DETAIL_LEVELS)
                if bad:
                    raise ConfigError(
                        f"unknown config key: {here}.{sorted(bad)[0]}"
                    )
            current.update({str(k): str(v) for k, v in value.items()})
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigError(f"{here} must be a list")
            setattr(target, key, [float(v) for v in value])
        elif isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{here} must be a boolean")
            setattr(target, key, value)
        elif isinstance(current, int) and not isinstance(current, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{here} must be a number")
            setattr(target, key, int(value))
        elif isinstance(current, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{here} must be a number")
            setattr(target, key, float(value))
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigError(f"{here} must be a string")
            setattr(target, key, value)
        else:
            setattr(target, key, value)


def _validate(config: EngineConfig) -> None:
    if config.backend.mode not in ("mock", "http"):
        raise ConfigError(f"backend.mode must be 'mock' or 'http', got {config.backend.mode!r}")
    if config.index.overlap >= config.index.chunk_size:
        raise ConfigError("index.overlap must be smaller than index.chunk_size")
    if len(config.retrieval.weights) != 2:
        raise ConfigError("retrieval.weights must have exactly two entries (bm25, vector)")
    missing = set(DETAIL_LEVELS) - set(config.funcall.detail_templates)
    if missing:
        raise ConfigError(f"funcall.detail_templates missing level: {sorted(missing)[0]}")


def config_from_dict(data: dict) -> EngineConfig:
    config = EngineConfig()
    _apply(config, data, "")
    _validate(config)
    return config


def load_config(path: str | None = None) -> EngineConfig:
    """Load a JSON config file; with no path, return pure defaults."""
    if path is None:
        return EngineConfig()
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def _to_plain(value: Any) -> Any:
    if is_dataclass(value):
        return {f.name: _to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_to_plain(v) for v in value]
    return value


def config_to_dict(config: EngineConfig) -> dict:
    return _to_plain(config)
