"""Tool deduplication and retrieval for LLM agents."""

from .core import Benchmark, QueryRecord, ToolSpec, Toolset, doc_text, load_benchmark, load_toolset, save_benchmark, save_toolset
from .embedding import EmbeddingMatrix, MockEmbeddingProvider, embed_toolset, mock_embed, top_k_neighbors
from .errors import InputError, IntegrityViolation, ProviderError, ToolScopeError
from .merger import MergePlan, MergerConfig, apply_merge, build_merge_plan, relabel_benchmark
from .retriever import RetrievalResult, RetrieverConfig, assemble_top_k, retrieve

__version__ = "0.1.0"

__all__ = [
    "Benchmark",
    "QueryRecord",
    "ToolSpec",
    "Toolset",
    "doc_text",
    "load_benchmark",
    "load_toolset",
    "save_benchmark",
    "save_toolset",
    "EmbeddingMatrix",
    "MockEmbeddingProvider",
    "embed_toolset",
    "mock_embed",
    "top_k_neighbors",
    "InputError",
    "IntegrityViolation",
    "ProviderError",
    "ToolScopeError",
    "MergePlan",
    "MergerConfig",
    "apply_merge",
    "build_merge_plan",
    "relabel_benchmark",
    "RetrievalResult",
    "RetrieverConfig",
    "assemble_top_k",
    "retrieve",
]
