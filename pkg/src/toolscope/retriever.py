"""Hybrid sparse/dense tool retrieval with reranking and multi-step assembly."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Protocol, Sequence

import numpy as np

from .core import QueryRecord, ToolSpec, Toolset, doc_text
from .embedding import EmbeddingMatrix, EmbeddingProvider, MOCK_DIM, cosine_scores, embed_query, embed_toolset, mock_embed
from .errors import AgentHallucination, KeyMismatch, ToolScopeError, AgentError, UnknownTool

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class RetrieverConfig:
    alpha: float = 1.0
    rerank_pool: int = 50
    k: int = 5
    epsilon: float = 1e-8
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    rerank: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.k < 1 or self.rerank_pool < 1:
            raise ValueError("k and rerank_pool must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


class BM25Index:
    """Okapi BM25 over the doc text of each tool.

    Scores sum over the distinct query terms:
    ``idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))`` with
    ``idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))``.
    """

    def __init__(self, toolset: Toolset, k1: float = 1.2, b: float = 0.75):
        if len(toolset) == 0:
            raise ValueError("cannot index an empty toolset")
        self.k1 = k1
        self.b = b
        self.tool_ids = tuple(toolset.ids)
        self._pos = {t: i for i, t in enumerate(self.tool_ids)}
        docs = [tokenize(doc_text(t)) for t in toolset]
        self.tf = [Counter(d) for d in docs]
        self.doc_len = np.array([len(d) for d in docs], dtype=np.float64)
        self.N = len(docs)
        self.avgdl = float(self.doc_len.mean())
        self.df: Counter = Counter()
        for c in self.tf:
            self.df.update(c.keys())
        self.idf = {t: math.log(1.0 + (self.N - n + 0.5) / (n + 0.5)) for t, n in self.df.items()}
        # term -> (doc indices, tf values) for vectorized scoring
        postings: dict[str, tuple[list[int], list[float]]] = {}
        for i, c in enumerate(self.tf):
            for term, n in c.items():
                ids, vals = postings.setdefault(term, ([], []))
                ids.append(i)
                vals.append(float(n))
        self._postings = {t: (np.array(i, dtype=np.int64), np.array(v)) for t, (i, v) in postings.items()}

    def _norm(self) -> np.ndarray:
        avgdl = self.avgdl if self.avgdl > 0 else 1.0
        return self.k1 * (1.0 - self.b + self.b * self.doc_len / avgdl)

    def scores(self, query: str) -> np.ndarray:
        out = np.zeros(self.N)
        norm = self._norm()
        for term in dict.fromkeys(tokenize(query)):
            post = self._postings.get(term)
            if post is None:
                continue
            ids, tf = post
            out[ids] += self.idf[term] * tf * (self.k1 + 1.0) / (tf + norm[ids])
        return out

    def score(self, query: str, tool_id: str) -> float:
        if tool_id not in self._pos:
            raise UnknownTool(f"tool {tool_id!r} is not in the BM25 index")
        return float(self.scores(query)[self._pos[tool_id]])


def build_bm25_index(toolset: Toolset, k1: float = 1.2, b: float = 0.75) -> BM25Index:
    return BM25Index(toolset, k1, b)


def bm25_score(index: BM25Index, query: str, tool_id: str) -> float:
    return index.score(query, tool_id)


def dense_scores(query: str, matrix: EmbeddingMatrix, provider: EmbeddingProvider) -> dict[str, float]:
    sims = cosine_scores(matrix, embed_query(query, provider))
    return dict(zip(matrix.tool_ids, map(float, sims)))


def minmax(values: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant vector maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _combine(sparse: np.ndarray, dense: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * minmax(dense) + (1.0 - alpha) * minmax(sparse)


def hybrid_scores(sparse: Mapping[str, float], dense: Mapping[str, float], alpha: float) -> dict[str, float]:
    """Weighted combination of dense and sparse scores after min-max scaling each."""
    if set(sparse) != set(dense):
        raise KeyMismatch("sparse and dense score maps cover different tools")
    keys = list(dense)
    combined = _combine(np.array([sparse[k] for k in keys]), np.array([dense[k] for k in keys]), alpha)
    return dict(zip(keys, map(float, combined)))


class Reranker(Protocol):
    def score(self, query: str, tool: ToolSpec) -> float: ...


class MockReranker:
    """Cosine of mock embeddings, scaled by 10 to resemble cross-encoder logits."""

    def __init__(self, dim: int = MOCK_DIM, scale: float = 10.0):
        self.dim = dim
        self.scale = scale
        self._cache: dict[str, np.ndarray] = {}

    def _vec(self, text: str) -> np.ndarray:
        v = self._cache.get(text)
        if v is None:
            v = self._cache[text] = mock_embed(text, self.dim)
        return v

    def score(self, query: str, tool: ToolSpec) -> float:
        return float(self._vec(query) @ self._vec(doc_text(tool))) * self.scale


class CrossEncoderReranker:
    """sentence-transformers cross-encoder; loaded lazily on first use."""

    def __init__(self, model_name: str = "cross-encoder/ms-marco-MiniLM-L6-v2"):
        self.model_name = model_name
        self._model = None

    def score(self, query: str, tool: ToolSpec) -> float:
        if self._model is None:
            from sentence_transformers import CrossEncoder

            self._model = CrossEncoder(self.model_name)
        return float(self._model.predict([(query, doc_text(tool))])[0])


@dataclass(frozen=True)
class ScoredTool:
    tool_id: str
    s_sparse: float
    s_dense: float
    s_hybrid: float
    s_rerank: float | None = None
    s_norm: float | None = None
    subquery_index: int = 0
    rank_in_subquery: int = 0

    @property
    def score(self) -> float:
        """The score the subquery was ranked by (rerank when present)."""
        return self.s_hybrid if self.s_rerank is None else self.s_rerank

    def to_dict(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "s_sparse": self.s_sparse,
            "s_dense": self.s_dense,
            "s_hybrid": self.s_hybrid,
            "s_rerank": self.s_rerank,
            "s_norm": self.s_norm,
        }


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    subqueries: tuple[tuple[ScoredTool, ...], ...]
    final_top_k: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "final_top_k": list(self.final_top_k),
            "subqueries": [
                {"index": j, "ranked": [s.to_dict() for s in ranked]} for j, ranked in enumerate(self.subqueries)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievalResult":
        subs = []
        for sq in d.get("subqueries", []):
            j = int(sq["index"])
            subs.append(
                tuple(
                    ScoredTool(
                        s["tool_id"], s["s_sparse"], s["s_dense"], s["s_hybrid"], s.get("s_rerank"), s.get("s_norm"), j, rank
                    )
                    for rank, s in enumerate(sq["ranked"], 1)
                )
            )
        return cls(str(d["query_id"]), tuple(subs), tuple(d["final_top_k"]))


@dataclass
class RetrievalIndex:
    toolset: Toolset
    bm25: BM25Index
    matrix: EmbeddingMatrix
    provider: EmbeddingProvider
    _ranks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ids = self.toolset.ids
        order = sorted(range(len(ids)), key=ids.__getitem__)
        ranks = np.empty(len(ids), dtype=np.int64)
        ranks[order] = np.arange(len(ids))
        self._ranks = ranks

    @classmethod
    def build(cls, toolset: Toolset, provider: EmbeddingProvider, config: RetrieverConfig | None = None) -> "RetrievalIndex":
        config = config or RetrieverConfig()
        return cls(toolset, BM25Index(toolset, config.bm25_k1, config.bm25_b), embed_toolset(toolset, provider), provider)


def retrieve_subquery(
    subquery: str,
    index: RetrievalIndex,
    config: RetrieverConfig,
    reranker: Reranker | None = None,
    subquery_index: int = 0,
) -> list[ScoredTool]:
    """Hybrid-score every tool, keep the top ``rerank_pool``, rerank them."""
    sparse = index.bm25.scores(subquery)
    dense = cosine_scores(index.matrix, embed_query(subquery, index.provider))
    hybrid = _combine(sparse, dense, config.alpha)
    pool = np.lexsort((index._ranks, -hybrid))[: config.rerank_pool]
    ids = index.toolset.ids
    rows = []
    for i in pool:
        tid = ids[int(i)]
        rr = None
        if config.rerank and reranker is not None:
            rr = float(reranker.score(subquery, index.toolset[tid]))
        rows.append((tid, float(sparse[i]), float(dense[i]), float(hybrid[i]), rr))
    if config.rerank and reranker is not None:
        rows.sort(key=lambda r: (-r[4], -r[3], r[0]))
    return [
        ScoredTool(tid, sp, de, hy, rr, None, subquery_index, rank)
        for rank, (tid, sp, de, hy, rr) in enumerate(rows, 1)
    ]


def normalize_subquery_tail(scored: Sequence[ScoredTool], epsilon: float = 1e-8) -> list[ScoredTool]:
    """Min-max normalize the ranking scores of every entry after the top-1."""
    if len(scored) <= 1:
        return list(scored)
    tail = scored[1:]
    vals = [s.score for s in tail]
    lo, hi = min(vals), max(vals)
    denom = hi - lo + epsilon
    return [scored[0], *(replace(s, s_norm=(s.score - lo) / denom) for s in tail)]


def assemble_top_k(per_subquery: Sequence[Sequence[ScoredTool]], k: int) -> list[str]:
    """All top-1 picks in step order, then the best normalized tail entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out: list[str] = []
    seen: set[str] = set()
    for ranked in per_subquery:
        if len(out) >= k:
            return out
        if ranked and ranked[0].tool_id not in seen:
            out.append(ranked[0].tool_id)
            seen.add(ranked[0].tool_id)
    pool = [s for ranked in per_subquery for s in ranked[1:]]
    pool.sort(key=lambda s: (-(s.s_norm or 0.0), s.subquery_index, s.rank_in_subquery, s.tool_id))
    for s in pool:
        if len(out) >= k:
            break
        if s.tool_id not in seen:
            out.append(s.tool_id)
            seen.add(s.tool_id)
    return out


def retrieve(record: QueryRecord, index: RetrievalIndex, config: RetrieverConfig, reranker: Reranker | None = None) -> RetrievalResult:
    per = []
    for j, step in enumerate(record.steps()):
        ranked = retrieve_subquery(step, index, config, reranker, subquery_index=j)
        per.append(tuple(normalize_subquery_tail(ranked, config.epsilon)))
    return RetrievalResult(record.query_id, tuple(per), tuple(assemble_top_k(per, config.k)))


# --- agent tool selection ------------------------------------------------------


class Agent(Protocol):
    def choose(self, question: str, step: str, candidates: Sequence[ToolSpec], step_ranking: Sequence[str]) -> str | None:
        """Return one candidate's name, or None when no tool applies."""
        ...


class TopRankedAgent:
    """Picks the best-ranked tool of the step's own retrieval that is on offer."""

    def choose(self, question: str, step: str, candidates: Sequence[ToolSpec], step_ranking: Sequence[str]) -> str | None:
        by_id = {c.id: c for c in candidates}
        for tid in step_ranking:
            if tid in by_id:
                return by_id[tid].name
        return None


@dataclass(frozen=True)
class Selection:
    query_id: str
    selected: tuple[str, ...]
    hallucinations: tuple[tuple[int, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "selected": list(self.selected),
            "hallucinations": [{"step": j, "name": n} for j, n in self.hallucinations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Selection":
        return cls(
            str(d["query_id"]),
            tuple(d.get("selected", [])),
            tuple((int(h["step"]), h["name"]) for h in d.get("hallucinations", [])),
        )


def select_tools(record: QueryRecord, retrieved: RetrievalResult, toolset: Toolset, agent: Agent) -> Selection:
    """Ask the agent for one tool per step, choosing among the retrieved top-k."""
    if not retrieved.final_top_k:
        raise ValueError(f"no retrieved tools for query {record.query_id!r}")
    candidates = [toolset[t] for t in retrieved.final_top_k]
    name_to_id: dict[str, str] = {}
    for c in candidates:
        name_to_id.setdefault(c.name, c.id)
    selected: list[str] = []
    bad: list[tuple[int, str]] = []
    for j, step in enumerate(record.steps()):
        ranking = [s.tool_id for s in retrieved.subqueries[j]] if j < len(retrieved.subqueries) else []
        try:
            name = agent.choose(record.query, step, candidates, ranking)
        except AgentHallucination as exc:
            bad.append((j, exc.name))
            continue
        except ToolScopeError:
            raise
        except Exception as exc:
            raise AgentError(f"agent failed on query {record.query_id!r} step {j}: {exc}") from exc
        if name is None:
            continue
        tid = name_to_id.get(name)
        if tid is None:
            bad.append((j, name))
            continue
        if tid not in selected:
            selected.append(tid)
    return Selection(record.query_id, tuple(selected), tuple(bad))
