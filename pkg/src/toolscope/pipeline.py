"""End-to-end orchestration: merge, retrieve, select, evaluate.

The CLI runs these stages through files; ``run_pipeline`` chains them
in memory for ablations and tests.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .core import Benchmark, Toolset
from .embedding import EmbeddingMatrix, EmbeddingProvider, HttpEmbeddingProvider, MockEmbeddingProvider, embed_toolset
from .errors import ConfigError, MissingSelection, ToolScopeError
from .evalkit import EvalReport, context_reduction, csr_at_k, per_query_hits, recall_at_k, silhouette_curve
from .http import DEFAULT_API_KEY_ENV
from .merger import (
    ClusterValidator,
    DocMerger,
    MergePlan,
    MergerConfig,
    PairClassifier,
    apply_merge,
    build_merge_plan,
    relabel_benchmark,
)
from .retriever import (
    Agent,
    CrossEncoderReranker,
    MockReranker,
    Reranker,
    RetrievalIndex,
    RetrievalResult,
    RetrieverConfig,
    Selection,
    TopRankedAgent,
    retrieve,
    select_tools,
)

log = logging.getLogger(__name__)


@dataclass
class Settings:
    merger: MergerConfig = field(default_factory=MergerConfig)
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    mock: bool = False
    embedding_base_url: str | None = None
    embedding_model: str = "thenlper/gte-large"
    chat_base_url: str | None = None
    chat_model: str = "gpt-4o"
    # "mock" or "cross-encoder"; the mock reranker is used whenever mock is set
    reranker: str = "cross-encoder"
    reranker_model: str = "cross-encoder/ms-marco-MiniLM-L6-v2"
    cache_dir: str | None = None
    api_key_env: str = DEFAULT_API_KEY_ENV
    seed: int = 0
    workers: int = 4


@dataclass
class Providers:
    embedder: EmbeddingProvider
    classifier: PairClassifier
    validator: ClusterValidator
    doc_merger: DocMerger
    reranker: Reranker
    agent: Agent


def make_providers(settings: Settings) -> Providers:
    """Mock doubles for every role, or HTTP/cross-encoder backends in live mode."""
    # deferred so that importing the library never pulls in the chat stack
    from .llm.adapters import ChatAgent, ChatClassifier, ChatDocMerger, ChatValidator
    from .llm.client import HttpChatClient
    from .llm.mock import MockChatBackend

    if settings.mock:
        chat = MockChatBackend()
        return Providers(
            embedder=MockEmbeddingProvider(),
            classifier=ChatClassifier(chat),
            validator=ChatValidator(chat),
            doc_merger=ChatDocMerger(chat),
            reranker=MockReranker(),
            agent=TopRankedAgent(),
        )
    if not settings.embedding_base_url or not settings.chat_base_url:
        raise ConfigError("live mode needs embedding_base_url and chat_base_url (or pass --mock-providers)")
    emb_cache = f"{settings.cache_dir}/embeddings" if settings.cache_dir else None
    embedder = HttpEmbeddingProvider(
        settings.embedding_base_url,
        settings.embedding_model,
        cache_dir=emb_cache,
        api_key_env=settings.api_key_env,
        max_workers=settings.workers,
    )
    chat = HttpChatClient(
        settings.chat_base_url,
        api_key_env=settings.api_key_env,
        cache_dir=settings.cache_dir,
        max_in_flight=settings.workers,
    )
    if settings.reranker == "mock":
        reranker: Reranker = MockReranker()
    elif settings.reranker == "cross-encoder":
        reranker = CrossEncoderReranker(settings.reranker_model)
    else:
        raise ConfigError(f"unknown reranker {settings.reranker!r}")
    m = settings.chat_model
    return Providers(embedder, ChatClassifier(chat, m), ChatValidator(chat, m), ChatDocMerger(chat, m), reranker, ChatAgent(chat, m))


# --- stages --------------------------------------------------------------------


@dataclass
class MergeOutcome:
    plan: MergePlan
    toolset: Toolset
    benchmark: Benchmark
    matrix: EmbeddingMatrix


def merge_stage(toolset: Toolset, benchmark: Benchmark, config: MergerConfig, providers: Providers, enabled: bool = True) -> MergeOutcome:
    benchmark.validate_against(toolset)
    try:
        matrix = embed_toolset(toolset, providers.embedder)
    except ToolScopeError as exc:
        raise exc.with_stage("embed")
    if not enabled:
        plan = MergePlan.identity(toolset)
    else:
        plan = build_merge_plan(toolset, matrix, config, providers.classifier, providers.validator, providers.doc_merger)
    merged = apply_merge(toolset, plan)
    relabeled = relabel_benchmark(benchmark, plan)
    relabeled.validate_against(merged)
    return MergeOutcome(plan, merged, relabeled, matrix)


def retrieve_stage(toolset: Toolset, benchmark: Benchmark, config: RetrieverConfig, providers: Providers, workers: int = 4) -> list[RetrievalResult]:
    """One result per query, in benchmark order."""
    try:
        index = RetrievalIndex.build(toolset, providers.embedder, config)
        reranker = providers.reranker if config.rerank else None
        records = list(benchmark)
        # queries are independent; map() keeps input order
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            return list(pool.map(lambda r: retrieve(r, index, config, reranker), records))
    except ToolScopeError as exc:
        raise exc.with_stage("retrieve")


def select_stage(toolset: Toolset, benchmark: Benchmark, results: Sequence[RetrievalResult], agent: Agent) -> list[Selection]:
    by_id = {r.query_id: r for r in results}
    out = []
    for rec in benchmark:
        res = by_id.get(rec.query_id)
        if res is None:
            raise MissingSelection(f"no retrieval result for query {rec.query_id!r}").with_stage("select")
        try:
            out.append(select_tools(rec, res, toolset, agent))
        except ToolScopeError as exc:
            raise exc.with_stage("select")
    return out


def evaluate(
    toolset: Toolset,
    benchmark: Benchmark,
    results: Sequence[RetrievalResult],
    selections: Sequence[Selection],
    recall_ks: Sequence[int] = (),
    silhouette_counts: Sequence[int] = (),
    matrix: EmbeddingMatrix | None = None,
    baseline_matrix: EmbeddingMatrix | None = None,
    seed: int = 0,
    k: int | None = None,
) -> EvalReport:
    """CSR at the run's k, Recall at every k up to it (prefixes of the final lists)."""
    top = {r.query_id: list(r.final_top_k) for r in results}
    sel = {s.query_id: list(s.selected) for s in selections}
    run_k = k if k is not None else max((len(v) for v in top.values()), default=0)
    ks = sorted({k for k in recall_ks if 1 <= k <= run_k} | ({run_k} if run_k else set()))
    recall = {k: recall_at_k(top, benchmark, k) for k in ks}
    csr = {run_k: csr_at_k(sel, benchmark)} if run_k else {}
    ctx = context_reduction(list(toolset), [[toolset[t] for t in top.get(r.query_id, ())] for r in benchmark])
    sil = base = None
    counts = [c for c in silhouette_counts if matrix is not None and 2 <= c < matrix.n]
    if counts:
        sil = silhouette_curve(matrix, counts, seed)
        if baseline_matrix is not None:
            base = silhouette_curve(baseline_matrix, [c for c in counts if c < baseline_matrix.n], seed)
    return EvalReport(csr, recall, per_query_hits(sel, benchmark), ctx, sil, base)


# --- in-memory run -----------------------------------------------------------------


@dataclass
class PipelineResult:
    toolset: Toolset
    benchmark: Benchmark
    plan: MergePlan
    results: list[RetrievalResult]
    selections: list[Selection]
    csr: float
    recall: float


def run_pipeline(
    toolset: Toolset,
    benchmark: Benchmark,
    settings: Settings | None = None,
    rerank: bool = True,
    merge: bool = True,
    autocorrect: bool = True,
    providers: Providers | None = None,
) -> PipelineResult:
    settings = settings or Settings()
    providers = providers or make_providers(settings)
    mcfg = replace(settings.merger, autocorrect_enabled=settings.merger.autocorrect_enabled and autocorrect)
    rcfg = replace(settings.retriever, rerank=settings.retriever.rerank and rerank)
    m = merge_stage(toolset, benchmark, mcfg, providers, enabled=merge)
    results = retrieve_stage(m.toolset, m.benchmark, rcfg, providers, settings.workers)
    selections = select_stage(m.toolset, m.benchmark, results, providers.agent)
    top = {r.query_id: list(r.final_top_k) for r in results}
    sel = {s.query_id: list(s.selected) for s in selections}
    return PipelineResult(
        m.toolset,
        m.benchmark,
        m.plan,
        results,
        selections,
        csr_at_k(sel, m.benchmark),
        recall_at_k(top, m.benchmark),
    )
