"""ragforge: a backend-agnostic retrieval-augmented generation engine for
technical PDF corpora.

Layout-aware PDF-to-Markdown conversion, hybrid BM25+vector retrieval
with context compression, a bounded self-reflective agent, retry-adaptive
function calling, a four-metric evaluation suite, and an HTTP service +
CLI. Runs fully offline against a deterministic mock backend or online
against any Ollama-compatible model server.
"""

from .agent import (
    AgenticRag,
    AgentLimits,
    AgentOptions,
    AgentTurnError,
    GraphState,
    TraceEvent,
)
from .backend import (
    Backend,
    BackendConfig,
    BackendError,
    GenRequest,
    GenResponse,
    MockBackend,
    OllamaBackend,
    ProtocolError,
    RerankerUnavailable,
    RetryableBackendError,
    RetryPolicy,
    ScriptRule,
    TerminalBackendError,
    mock_embed,
    token_overlap_score,
)
from .config import ConfigError, EngineConfig, load_config
from .engine import (
    Engine,
    EngineError,
    IngestReport,
    SessionStore,
    TraceStore,
    TurnResult,
    UnknownSessionError,
)
from .evalmetrics import (
    EvalError,
    EvalRecord,
    EvalTooling,
    MetricReport,
    SubstringJudge,
    answer_relevancy,
    context_precision,
    context_recall,
    evaluate_dataset,
    faithfulness,
    load_dataset,
)
from .funcall import (
    FunctionDescriptor,
    MissingArgumentError,
    PersonaConfig,
    ToolCallEnvelope,
    build_generation_prompt,
    build_query_input,
    invoke,
    parse_query_input,
    prompt_by_retry,
)
from .index import Chunk, IndexManifest, VectorIndex, VectorIndexError, chunk_text
from .layout import (
    ConversionStats,
    ExtractedTable,
    LayoutError,
    PageElement,
    PageModel,
    convert_document,
    extract_pages,
    order_reading,
    partition_columns,
    render_page_markdown,
    render_table_markdown,
)
from .retrieval import (
    Bm25Index,
    Bm25Params,
    CompressionConfig,
    FusionConfig,
    RerankError,
    RetrievalError,
    ScoredDoc,
    compress_contexts,
    litm_reorder,
    redundancy_filter,
    rerank_top_n,
    rrf_fuse,
)

__version__ = "0.1.0"
