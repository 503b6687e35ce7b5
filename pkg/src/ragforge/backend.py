"""Model backend contract: generation, embedding, boolean judging, and
cross-encoder scoring behind one interface.

Two implementations ship: an HTTP client speaking the Ollama-compatible
protocol, and a fully deterministic mock driven by script rules so every
engine path runs offline. Judging and grading always use deterministic
decoding (temperature 0, fixed seed); only final answer generation takes
the configured temperature.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .text import tokenize

logger = logging.getLogger(__name__)

ENV_BACKEND_URL = "RAGFORGE_BACKEND_URL"

MOCK_EMBED_DIM = 256
_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


class BackendError(Exception):
    pass


class RetryableBackendError(BackendError):
    """Transient failure (timeout, connection refused); eligible for retry."""


class TerminalBackendError(BackendError):
    """Non-retryable failure; carries the HTTP status when one exists."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(BackendError):
    """json_mode response did not parse; carries the raw model text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class RerankerUnavailable(BackendError):
    pass


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 0.5

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class BackendConfig:
    base_url: str = "http://localhost:11434"
    generation_model: str = "llama3"
    embedding_model: str = "nomic-embed-text"
    rerank_url: str | None = None
    timeout_seconds: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self) -> None:
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be > 0")
        override = os.environ.get(ENV_BACKEND_URL)
        if override:
            self.base_url = override


@dataclass
class GenRequest:
    prompt: str
    json_mode: bool = False
    temperature: float = 0.0
    seed: int = 0


@dataclass
class GenResponse:
    text: str
    parsed: object | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_seconds: float = 0.0
    attempts: int = 1


class Backend(Protocol):
    def generate(self, req: GenRequest) -> GenResponse: ...

    def embed(self, text: str) -> np.ndarray: ...

    def judge_bool(self, prompt: str, key: str) -> bool: ...

    def rerank_score(self, query: str, doc_text: str) -> float: ...


def _run_with_retries(call: Callable[[], GenResponse], policy: RetryPolicy) -> GenResponse:
    attempts = 0
    while True:
        attempts += 1
        try:
            response = call()
            response.attempts = attempts
            return response
        except RetryableBackendError:
            if attempts >= policy.max_attempts:
                raise
            if policy.backoff_seconds > 0:
                time.sleep(policy.backoff_seconds * (2 ** (attempts - 1)))


def _attach_json(response: GenResponse) -> GenResponse:
    try:
        response.parsed = json.loads(response.text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"json_mode output is not JSON: {exc}", raw=response.text) from exc
    return response


def coerce_bool(value: object) -> bool:
    """Accept JSON booleans plus case-insensitive yes/no strings."""
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered == "yes":
            return True
        if lowered == "no":
            return False
    raise ValueError(f"not a boolean-ish value: {value!r}")


def _judge_bool(backend: Backend, prompt: str, key: str) -> bool:
    response = backend.generate(GenRequest(prompt=prompt, json_mode=True))
    payload = response.parsed
    if not isinstance(payload, dict) or key not in payload:
        raise ProtocolError(f"missing key: {key}", raw=response.text)
    try:
        return coerce_bool(payload[key])
    except ValueError as exc:
        raise ProtocolError(str(exc), raw=response.text) from exc


def token_overlap_score(query: str, doc_text: str) -> float:
    """Deterministic relevance stand-in: count of shared lowercase tokens."""
    return float(len(set(tokenize(query.lower())) & set(tokenize(doc_text.lower()))))


def fnv1a_32(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


def mock_embed(text: str) -> np.ndarray:
    """Bag-of-buckets embedding: FNV-1a hash each lowercase token into one
    of 256 buckets, count, L2-normalize. Deterministic and stable for
    identical text."""
    if not text:
        raise BackendError("cannot embed empty text")
    counts = np.zeros(MOCK_EMBED_DIM, dtype=np.float64)
    for token in tokenize(text.lower()):
        counts[fnv1a_32(token.encode("utf-8")) % MOCK_EMBED_DIM] += 1.0
    norm = np.linalg.norm(counts)
    if norm == 0.0:
        raise BackendError(f"text produced no tokens: {text!r}")
    return (counts / norm).astype(np.float32)


# ---------------------------------------------------------------------------
# Scripted mock backend
# ---------------------------------------------------------------------------


@dataclass
class ScriptRule:
    """One generation rule: fires when `contains` occurs in the prompt
    (None matches everything). `response` is the raw text or a callable
    of the prompt. `fail_times` simulates that many timeouts before the
    rule answers; `times` caps how often the rule may answer (None =
    unlimited), letting a rule list act as a FIFO script.
    """

    contains: str | None
    response: str | Callable[[str], str]
    fail_times: int = 0
    times: int | None = None


def _extract_question(prompt: str) -> str:
    marker = "### Current Question\n"
    if marker in prompt:
        tail = prompt.split(marker, 1)[1]
        return tail.split("\n", 1)[0].strip()
    for line in reversed(prompt.splitlines()):
        if line.startswith("Question: "):
            return line[len("Question: "):].strip()
        if line.startswith("Current question: "):
            return line[len("Current question: "):].strip()
    return ""


def default_script() -> list[ScriptRule]:
    """A cooperative offline model: judges everything favorably, rewrites
    by echoing the question, and answers deterministically from the prompt."""
    return [
        ScriptRule(contains='"relevant"', response='{"relevant": true}'),
        ScriptRule(contains='"grounded"', response='{"grounded": true}'),
        ScriptRule(contains='"addresses"', response='{"addresses": true}'),
        ScriptRule(
            contains="Return only the rewritten question.",
            response=lambda prompt: _extract_question(prompt) or "rewritten question",
        ),
        ScriptRule(
            contains=None,
            response=lambda prompt: (
                f"Mock answer: {_extract_question(prompt)}".strip().rstrip(":")
            ),
        ),
    ]


class MockBackend:
    """Pure function of (script, request): replaying the same script against
    the same request sequence yields byte-identical responses."""

    def __init__(
        self,
        rules: Sequence[ScriptRule] | None = None,
        *,
        retry: RetryPolicy | None = None,
        rerank_scorer: Callable[[str, str], float] | None = token_overlap_score,
        embedder: Callable[[str], np.ndarray] = mock_embed,
    ):
        self.rules = [
            ScriptRule(r.contains, r.response, r.fail_times, r.times)
            for r in (rules if rules is not None else default_script())
        ]
        self.retry = retry or RetryPolicy(max_attempts=3, backoff_seconds=0.0)
        self._rerank_scorer = rerank_scorer
        self._embedder = embedder
        self.calls: list[str] = []

    def _find_rule(self, prompt: str) -> ScriptRule:
        for rule in self.rules:
            if rule.times is not None and rule.times <= 0:
                continue
            if rule.contains is None or rule.contains in prompt:
                return rule
        raise TerminalBackendError(f"mock script has no rule for prompt: {prompt[:80]!r}")

    def generate(self, req: GenRequest) -> GenResponse:
        if not req.prompt:
            raise TerminalBackendError("prompt must be non-empty")
        self.calls.append(req.prompt)
        rule = self._find_rule(req.prompt)

        def attempt() -> GenResponse:
            if rule.fail_times > 0:
                rule.fail_times -= 1
                raise RetryableBackendError("scripted timeout")
            if rule.times is not None:
                rule.times -= 1
            text = rule.response(req.prompt) if callable(rule.response) else rule.response
            response = GenResponse(
                text=text,
                prompt_tokens=len(tokenize(req.prompt)),
                completion_tokens=len(tokenize(text)),
            )
            return _attach_json(response) if req.json_mode else response

        return _run_with_retries(attempt, self.retry)

    def embed(self, text: str) -> np.ndarray:
        return self._embedder(text)

    def judge_bool(self, prompt: str, key: str) -> bool:
        return _judge_bool(self, prompt, key)

    def rerank_score(self, query: str, doc_text: str) -> float:
        if self._rerank_scorer is None:
            raise RerankerUnavailable("reranker unavailable: no mock scorer configured")
        return float(self._rerank_scorer(query, doc_text))


# ---------------------------------------------------------------------------
# Ollama-compatible HTTP backend
# ---------------------------------------------------------------------------


class OllamaBackend:
    """Client for any server speaking the Ollama HTTP protocol.

    Generation:  POST {base}/api/generate
    Embedding:   POST {base}/api/embeddings
    Reranking:   POST {rerank_url}/score (optional sidecar returning
                 {"score": r} for {"query", "document"})
    """

    def __init__(self, config: BackendConfig | None = None):
        import requests

        self.config = config or BackendConfig()
        self._session = requests.Session()
        self._requests = requests
        self._embed_dim: int | None = None

    def _post(self, url: str, payload: dict) -> dict:
        try:
            response = self._session.post(url, json=payload, timeout=self.config.timeout_seconds)
        except self._requests.exceptions.Timeout as exc:
            raise RetryableBackendError(f"timeout talking to {url}") from exc
        except self._requests.exceptions.ConnectionError as exc:
            raise RetryableBackendError(f"connection failed for {url}: {exc}") from exc
        if response.status_code >= 500:
            raise RetryableBackendError(f"{url} returned {response.status_code}")
        if not response.ok:
            raise TerminalBackendError(
                f"{url} returned {response.status_code}: {response.text[:200]}",
                status=response.status_code,
            )
        try:
            return response.json()
        except ValueError as exc:
            raise TerminalBackendError(f"{url} returned non-JSON body") from exc

    def generate(self, req: GenRequest) -> GenResponse:
        if not req.prompt:
            raise TerminalBackendError("prompt must be non-empty")
        url = f"{self.config.base_url.rstrip('/')}/api/generate"
        payload: dict = {
            "model": self.config.generation_model,
            "prompt": req.prompt,
            "stream": False,
            "options": {"temperature": req.temperature, "seed": req.seed},
        }
        if req.json_mode:
            payload["format"] = "json"

        def attempt() -> GenResponse:
            started = time.monotonic()
            body = self._post(url, payload)
            response = GenResponse(
                text=body.get("response", ""),
                prompt_tokens=int(body.get("prompt_eval_count", 0) or 0),
                completion_tokens=int(body.get("eval_count", 0) or 0),
                latency_seconds=time.monotonic() - started,
            )
            return _attach_json(response) if req.json_mode else response

        try:
            return _run_with_retries(attempt, self.config.retry)
        except RetryableBackendError as exc:
            raise TerminalBackendError(
                f"backend unreachable after {self.config.retry.max_attempts} attempts: {exc}"
            ) from exc

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise TerminalBackendError("cannot embed empty text")
        url = f"{self.config.base_url.rstrip('/')}/api/embeddings"
        payload = {"model": self.config.embedding_model, "prompt": text}

        def attempt() -> GenResponse:
            body = self._post(url, payload)
            vector = body.get("embedding")
            if not isinstance(vector, list) or not vector:
                raise TerminalBackendError(f"{url} returned no embedding")
            response = GenResponse(text="")
            response.parsed = np.asarray(vector, dtype=np.float32)
            return response

        result = _run_with_retries(attempt, self.config.retry)
        vec: np.ndarray = result.parsed  # type: ignore[assignment]
        if self._embed_dim is None:
            self._embed_dim = vec.shape[0]
        elif vec.shape[0] != self._embed_dim:
            raise TerminalBackendError(
                f"embedding dim drifted from {self._embed_dim} to {vec.shape[0]}"
            )
        return vec

    def judge_bool(self, prompt: str, key: str) -> bool:
        return _judge_bool(self, prompt, key)

    def rerank_score(self, query: str, doc_text: str) -> float:
        if not self.config.rerank_url:
            raise RerankerUnavailable("reranker unavailable: no rerank endpoint configured")
        url = f"{self.config.rerank_url.rstrip('/')}/score"
        body = self._post(url, {"query": query, "document": doc_text})
        if "score" not in body:
            raise TerminalBackendError(f"{url} returned no score field")
        return float(body["score"])
