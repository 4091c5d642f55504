"""Selection/retrieval metrics and toolset-overlap diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Benchmark, ToolSpec, doc_text
from .embedding import EmbeddingMatrix
from .errors import EmptyGold, MissingSelection, SingleCluster


def _require(entries: Mapping, benchmark: Benchmark) -> None:
    missing = [r.query_id for r in benchmark if r.query_id not in entries]
    if missing:
        raise MissingSelection(f"no entry for queries {missing[:5]}")


def csr_at_k(selections: Mapping[str, Iterable[str]], benchmark: Benchmark) -> float:
    """Fraction of queries whose selected tool set equals the gold set exactly."""
    _require(selections, benchmark)
    if len(benchmark) == 0:
        return 0.0
    hits = sum(set(selections[r.query_id]) == set(r.gold_tools) for r in benchmark)
    return hits / len(benchmark)


def recall_at_k(retrieved: Mapping[str, Sequence[str]], benchmark: Benchmark, k: int | None = None) -> float:
    """Mean fraction of gold tools present in each query's top-k list.

    With ``k`` given, lists are truncated to their first ``k`` entries.
    """
    _require(retrieved, benchmark)
    if len(benchmark) == 0:
        return 0.0
    total = 0.0
    for r in benchmark:
        gold = set(r.gold_tools)
        if not gold:
            raise EmptyGold(f"query {r.query_id!r} has no gold tools")
        top = retrieved[r.query_id]
        if k is not None:
            top = top[:k]
        total += len(gold & set(top)) / len(gold)
    return total / len(benchmark)


def per_query_hits(selections: Mapping[str, Iterable[str]], benchmark: Benchmark) -> list[dict]:
    out = []
    for r in benchmark:
        sel = sorted(set(selections.get(r.query_id, ())))
        out.append({"query_id": r.query_id, "selected": sel, "gold": sorted(set(r.gold_tools)), "hit": set(sel) == set(r.gold_tools)})
    return out


# --- clustering diagnostics ---------------------------------------------------------


def silhouette(matrix: EmbeddingMatrix, assignments: Mapping[str, object]) -> float:
    """Mean silhouette with cosine distance; singleton-cluster points score 0."""
    labels = [assignments[t] for t in matrix.tool_ids]
    uniq = sorted(set(labels), key=repr)
    if len(uniq) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    lab = np.array([uniq.index(l) for l in labels])
    V = matrix.vectors
    dist = np.clip(1.0 - V @ V.T, 0.0, 2.0)
    n = len(lab)
    counts = np.bincount(lab, minlength=len(uniq))
    # per-point summed distance to every cluster
    sums = np.stack([dist[:, lab == c].sum(axis=1) for c in range(len(uniq))], axis=1)
    s = np.zeros(n)
    for i in range(n):
        own = lab[i]
        if counts[own] == 1:
            continue
        a = sums[i, own] / (counts[own] - 1)
        others = [sums[i, c] / counts[c] for c in range(len(uniq)) if c != own]
        b = min(others)
        m = max(a, b)
        s[i] = 0.0 if m == 0 else (b - a) / m
    return float(s.mean())


def kmeans(matrix: EmbeddingMatrix, cluster_count: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> dict[str, int]:
    """Lloyd's algorithm with k-means++ seeding from ``numpy.random.default_rng(seed)``."""
    X = np.asarray(matrix.vectors, dtype=np.float64)
    n = X.shape[0]
    if not 2 <= cluster_count <= n:
        raise ValueError(f"cluster_count must lie in [2, {n}]")
    rng = np.random.default_rng(seed)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, cluster_count):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center; pick unused indices in order
            used = {tuple(c) for c in centers}
            idx = next((i for i in range(n) if tuple(X[i]) not in used), int(rng.integers(n)))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    C = np.array(centers)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        new_c = C.copy()
        for c in range(cluster_count):
            members = X[labels == c]
            if len(members):
                new_c[c] = members.mean(axis=0)
        shift = float(np.abs(new_c - C).max())
        C = new_c
        if shift < tol:
            break
    labels = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
    return {t: int(l) for t, l in zip(matrix.tool_ids, labels)}


def silhouette_curve(matrix: EmbeddingMatrix, cluster_counts: Iterable[int], seed: int = 0) -> dict[int, float]:
    out = {}
    for c in cluster_counts:
        if 2 <= c < matrix.n:
            out[int(c)] = silhouette(matrix, kmeans(matrix, c, seed))
    return out


# --- context accounting ------------------------------------------------------------------


def context_tokens(tools: Iterable[ToolSpec]) -> int:
    """Whitespace-token count of the tools' concatenated doc texts."""
    return sum(len(doc_text(t).split()) for t in tools)


@dataclass(frozen=True)
class ContextTokens:
    original_total: int
    retrieved_total: float
    pct_reduction: float

    def to_dict(self) -> dict:
        return {"original_total": self.original_total, "retrieved_total": self.retrieved_total, "pct_reduction": self.pct_reduction}


def context_reduction(all_tools: Sequence[ToolSpec], retrieved_lists: Sequence[Sequence[ToolSpec]]) -> ContextTokens:
    """Full-toolset tokens vs the mean tokens of the per-query retrieved lists."""
    original = context_tokens(all_tools)
    retrieved = float(np.mean([context_tokens(l) for l in retrieved_lists])) if retrieved_lists else 0.0
    pct = 1.0 - retrieved / original if original > 0 else 0.0
    return ContextTokens(original, retrieved, pct)


@dataclass
class EvalReport:
    csr_at_k: dict[int, float]
    recall_at_k: dict[int, float]
    per_query: list[dict]
    context_tokens: ContextTokens | None = None
    silhouette: dict[int, float] | None = None
    silhouette_baseline: dict[int, float] | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "csr_at_k": {str(k): v for k, v in sorted(self.csr_at_k.items())},
            "recall_at_k": {str(k): v for k, v in sorted(self.recall_at_k.items())},
            "per_query": self.per_query,
            "context_tokens": None if self.context_tokens is None else self.context_tokens.to_dict(),
            "silhouette": None if self.silhouette is None else {str(k): v for k, v in sorted(self.silhouette.items())},
        }
        if self.silhouette_baseline is not None:
            d["silhouette_baseline"] = {str(k): v for k, v in sorted(self.silhouette_baseline.items())}
        if self.extras:
            d.update(self.extras)
        return d

    def metric_rows(self) -> list[tuple[str, int, float]]:
        rows = [("csr", k, v) for k, v in sorted(self.csr_at_k.items())]
        rows += [("recall", k, v) for k, v in sorted(self.recall_at_k.items())]
        return rows

    def to_tsv(self) -> str:
        lines = ["metric\tk\tvalue"] + [f"{m}\t{k}\t{v:.6f}" for m, k, v in self.metric_rows()]
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        ks = sorted(set(self.csr_at_k) | set(self.recall_at_k))
        head = "metric   " + "".join(f"{'@' + str(k):>9}" for k in ks)
        lines = [head]
        for name, series in (("CSR", self.csr_at_k), ("Recall", self.recall_at_k)):
            cells = "".join(f"{series[k]:>9.3f}" if k in series else f"{'-':>9}" for k in ks)
            lines.append(f"{name:<9}{cells}")
        if self.context_tokens is not None:
            ct = self.context_tokens
            lines.append(
                f"context tokens: original {ct.original_total}, retrieved {ct.retrieved_total:.1f}, reduction {ct.pct_reduction * 100:.2f}%"
            )
        if self.silhouette:
            lines.append("silhouette: " + ", ".join(f"k={k}: {v:.3f}" for k, v in sorted(self.silhouette.items())))
        return "\n".join(lines)


# --- ablation ----------------------------------------------------------------------------------

ABLATION_GRID: tuple[tuple[bool, bool, bool], ...] = (
    (True, True, True),
    (True, True, False),
    (True, False, False),
    (False, True, True),
    (False, False, False),
)


@dataclass(frozen=True)
class AblationRow:
    reranker: bool
    merger: bool
    autocorrect: bool
    csr: float
    recall: float
    merged_size: int


def run_ablation(
    benchmark, toolset, settings, grid: Sequence[tuple[bool, bool, bool]] = ABLATION_GRID, providers=None
) -> list[AblationRow]:
    """One full pipeline run per (reranker, merger, autocorrect) flag combination."""
    from .pipeline import make_providers, run_pipeline

    providers = providers or make_providers(settings)
    rows = []
    for rerank, merge, autocorrect in grid:
        res = run_pipeline(toolset, benchmark, settings, rerank=rerank, merge=merge, autocorrect=autocorrect, providers=providers)
        rows.append(AblationRow(rerank, merge, autocorrect and merge, res.csr, res.recall, len(res.toolset)))
    return rows


def format_ablation(rows: Sequence[AblationRow], label: str = "dataset") -> str:
    mark = lambda b: "Y" if b else "N"
    lines = [f"{'Dataset':<12}{'Reranker':>10}{'Merger':>8}{'AutoCorrect':>13}{'CSR':>8}"]
    for i, r in enumerate(rows):
        lines.append(f"{label if i == 0 else '':<12}{mark(r.reranker):>10}{mark(r.merger):>8}{mark(r.autocorrect):>13}{r.csr:>8.3f}")
    return "\n".join(lines)


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    lines = ["reranker,merger,autocorrect,csr,recall,merged_size"]
    lines += [f"{int(r.reranker)},{int(r.merger)},{int(r.autocorrect)},{r.csr:.6f},{r.recall:.6f},{r.merged_size}" for r in rows]
    return "\n".join(lines) + "\n"
