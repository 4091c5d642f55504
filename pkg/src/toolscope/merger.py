"""Graph-based consolidation of overlapping tools.

Pipeline: cosine candidate pairs -> pairwise classification -> connected
components -> optional LLM audit -> representative per cluster -> merged
documentation -> merge map ``phi`` used to rewrite the toolset and benchmark.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .core import Benchmark, QueryRecord, ToolSpec, Toolset
from .embedding import EmbeddingMatrix, top_k_neighbors
from .errors import (
    ClassifierError,
    ForeignId,
    IntegrityViolation,
    MergerLLMError,
    EmptySynthesis,
    OverlappingSubclusters,
    PlanMismatch,
    ToolScopeError,
    UnknownGoldTool,
    ValidatorError,
)
from .llm.parsing import MERGE_BAD, MERGE_OK, Verdict
from .names import DEFAULT_SYNONYMS, group_by_token_multiset, same_token_set

log = logging.getLogger(__name__)

UNAUDITED = "UNAUDITED"


@dataclass(frozen=True)
class MergerConfig:
    candidate_k: int = 30
    cosine_threshold: float = 0.82
    autocorrect_enabled: bool = True
    workers: int = 4
    doc_fallback: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.cosine_threshold < 1.0:
            raise ValueError("cosine_threshold must lie strictly between 0 and 1")
        if self.candidate_k < 1:
            raise ValueError("candidate_k must be >= 1")


@dataclass(frozen=True, order=True)
class CandidatePair:
    a: str
    b: str
    cosine: float = field(compare=False)

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("a candidate pair needs two distinct tools")
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def key(self) -> tuple[str, str]:
        return (self.a, self.b)


@dataclass(frozen=True)
class OverlapGraph:
    nodes: tuple[str, ...]
    edges: tuple[CandidatePair, ...]
    rationales: Mapping[tuple[str, str], str] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Cluster:
    members: tuple[str, ...]
    representative: str | None = None
    verdict: str = UNAUDITED

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))
        if self.representative is not None and self.representative not in self.members:
            raise IntegrityViolation(f"representative {self.representative!r} is not a member of {self.members}")

    @property
    def pruned(self) -> tuple[str, ...]:
        return tuple(m for m in self.members if m != self.representative)


@dataclass(frozen=True)
class AuditRecord:
    members: tuple[str, ...]
    verdict: str
    reason: str
    sub_clusters: tuple[tuple[str, ...], ...]
    kept: tuple[tuple[str, ...], ...]
    unmerged: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "verdict": self.verdict,
            "reason": self.reason,
            "sub_clusters": [list(c) for c in self.sub_clusters],
            "kept": [list(c) for c in self.kept],
            "unmerged": list(self.unmerged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditRecord":
        return cls(
            members=tuple(d["members"]),
            verdict=d["verdict"],
            reason=d.get("reason", ""),
            sub_clusters=tuple(tuple(c) for c in d.get("sub_clusters", [])),
            kept=tuple(tuple(c) for c in d.get("kept", [])),
            unmerged=tuple(d.get("unmerged", [])),
        )


# --- role interfaces and rule-based doubles ----------------------------------


class PairClassifier(Protocol):
    def classify(self, target: ToolSpec, candidate: ToolSpec) -> tuple[int, str]: ...


class ClusterValidator(Protocol):
    def validate(self, members: Sequence[ToolSpec]) -> Verdict: ...


class DocMerger(Protocol):
    def merge(self, keep: ToolSpec, prune: Sequence[ToolSpec]) -> tuple[str, str]: ...


class RuleClassifier:
    """Positive iff both names have the same token set after synonym mapping."""

    def __init__(self, synonyms: Mapping[str, str] | None = None):
        self.synonyms = DEFAULT_SYNONYMS if synonyms is None else synonyms

    def classify(self, target: ToolSpec, candidate: ToolSpec) -> tuple[int, str]:
        if same_token_set(target.name, candidate.name, self.synonyms):
            return 1, "Names normalize to the same tokens."
        return 0, "Names normalize to different tokens."


def rule_split(members: Sequence[ToolSpec], synonyms: Mapping[str, str] | None = None) -> list[list[str]]:
    return group_by_token_multiset(((t.id, t.name) for t in members), synonyms)


class RuleValidator:
    def __init__(self, synonyms: Mapping[str, str] | None = None):
        self.synonyms = DEFAULT_SYNONYMS if synonyms is None else synonyms

    def validate(self, members: Sequence[ToolSpec]) -> Verdict:
        groups = rule_split(members, self.synonyms)
        if len(groups) == 1:
            return Verdict(MERGE_OK, (), "All names share one canonical token multiset.")
        return Verdict(MERGE_BAD, tuple(tuple(g) for g in groups), "Names split into distinct token multisets.")


class ConcatDocMerger:
    """Keeps the representative's signature; joins distinct descriptions with ' | '."""

    def merge(self, keep: ToolSpec, prune: Sequence[ToolSpec]) -> tuple[str, str]:
        seen: list[str] = []
        for t in [keep, *prune]:
            if t.description and t.description not in seen:
                seen.append(t.description)
        return keep.signature, " | ".join(seen)


# --- union-find ---------------------------------------------------------------


class UnionFind:
    def __init__(self, items: Iterable[str] = ()):
        self.parent: dict[str, str] = {}
        self.size: dict[str, int] = {}
        for x in items:
            self.add(x)

    def add(self, x: str) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]

    def groups(self) -> list[list[str]]:
        out: dict[str, list[str]] = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


# --- pipeline stages ------------------------------------------------------------


def generate_candidates(matrix: EmbeddingMatrix, config: MergerConfig) -> list[CandidatePair]:
    """Top-k neighbour pairs with cosine >= threshold, deduplicated and sorted."""
    n = matrix.n
    if n < 2:
        return []
    k = min(config.candidate_k, n - 1)
    keys: set[tuple[str, str]] = set()
    for i in range(n):
        for tid, cos in top_k_neighbors(matrix, i, k):
            if cos < config.cosine_threshold - 1e-12:
                break
            a, b = sorted((matrix.tool_ids[i], tid))
            keys.add((a, b))
    pairs = []
    V = matrix.vectors
    for a, b in keys:
        cos = float(np.clip(V[matrix.position(a)] @ V[matrix.position(b)], -1.0, 1.0))
        if cos >= config.cosine_threshold:
            pairs.append(CandidatePair(a, b, cos))
    pairs.sort(key=lambda p: (-p.cosine, p.a, p.b))
    return pairs


def classify_pairs(
    pairs: Sequence[CandidatePair],
    toolset: Toolset,
    classifier: PairClassifier,
    workers: int = 4,
) -> OverlapGraph:
    unique: dict[tuple[str, str], CandidatePair] = {}
    for p in pairs:
        unique.setdefault(p.key, p)
    todo = list(unique.values())
    for p in todo:
        if p.a not in toolset or p.b not in toolset:
            raise PlanMismatch(f"candidate pair {p.key} references unknown tools")

    def run(p: CandidatePair):
        try:
            return classifier.classify(toolset[p.a], toolset[p.b])
        except ToolScopeError:
            raise
        except Exception as exc:
            raise ClassifierError(f"classifier failed on {p.key}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, todo))
    edges, rationales = [], {}
    for p, (label, rationale) in zip(todo, results):
        if label not in (0, 1):
            raise ClassifierError(f"classifier returned {label!r} for {p.key}")
        rationales[p.key] = rationale
        if label == 1:
            edges.append(p)
    return OverlapGraph(tuple(toolset.ids), tuple(edges), rationales)


def connected_components(graph: OverlapGraph) -> list[Cluster]:
    """Non-singleton components, ordered by their smallest member id."""
    uf = UnionFind(graph.nodes)
    for e in graph.edges:
        uf.add(e.a)
        uf.add(e.b)
        uf.union(e.a, e.b)
    clusters = [Cluster(tuple(g)) for g in uf.groups() if len(g) > 1]
    clusters.sort(key=lambda c: c.members[0])
    return clusters


def choose_representative(cluster: Cluster, toolset: Toolset) -> str:
    """Shortest function name wins; ties go to the lexicographically smaller name."""
    if not cluster.members:
        raise ValueError("empty cluster")
    return min(cluster.members, key=lambda m: (len(toolset[m].name), toolset[m].name, m))


def check_integrity(clusters: Sequence[Cluster], tool_ids: Iterable[str]) -> None:
    known = set(tool_ids)
    owner: dict[str, int] = {}
    for i, c in enumerate(clusters):
        for m in c.members:
            if m not in known:
                raise PlanMismatch(f"cluster member {m!r} is not in the toolset")
            if m in owner:
                raise IntegrityViolation(f"tool {m!r} appears in clusters {owner[m]} and {i}")
            owner[m] = i


def _in_toolset_order(ids: Iterable[str], toolset: Toolset) -> list[str]:
    return sorted(ids, key=toolset.position)


def autocorrect_with_audit(
    clusters: Sequence[Cluster],
    toolset: Toolset,
    validator: ClusterValidator,
    workers: int = 4,
) -> tuple[list[Cluster], list[AuditRecord]]:
    """One validation pass per cluster; returns refined clusters and audit records."""
    check_integrity(clusters, toolset.ids)

    def run(c: Cluster) -> Verdict:
        members = [toolset[m] for m in _in_toolset_order(c.members, toolset)]
        try:
            return validator.validate(members)
        except ToolScopeError:
            raise
        except Exception as exc:
            raise ValidatorError(f"validator failed on {list(c.members)}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        verdicts = list(pool.map(run, clusters))

    out: list[Cluster] = []
    records: list[AuditRecord] = []
    for c, v in zip(clusters, verdicts):
        if v.ok:
            out.append(Cluster(c.members, verdict=MERGE_OK))
            records.append(AuditRecord(c.members, MERGE_OK, v.reason, (), (c.members,), ()))
            continue
        seen: set[str] = set()
        for sub in v.sub_clusters:
            foreign = set(sub) - set(c.members)
            if foreign:
                raise ForeignId(f"validator returned ids {sorted(foreign)} outside cluster {list(c.members)}")
            if seen.intersection(sub):
                raise OverlappingSubclusters(f"validator sub-clusters overlap in cluster {list(c.members)}")
            seen.update(sub)
        kept = [tuple(sorted(s)) for s in v.sub_clusters if len(s) > 1]
        kept_ids = {m for s in kept for m in s}
        unmerged = tuple(_in_toolset_order((m for m in c.members if m not in kept_ids), toolset))
        out.extend(Cluster(s, verdict=MERGE_BAD) for s in kept)
        records.append(AuditRecord(c.members, MERGE_BAD, v.reason, v.sub_clusters, tuple(kept), unmerged))
    out.sort(key=lambda c: c.members[0])
    check_integrity(out, toolset.ids)
    return out, records


def autocorrect(clusters: Sequence[Cluster], toolset: Toolset, validator: ClusterValidator, workers: int = 4) -> list[Cluster]:
    return autocorrect_with_audit(clusters, toolset, validator, workers)[0]


def synthesize_merged_doc(cluster: Cluster, toolset: Toolset, merger: DocMerger, fallback: bool = False) -> ToolSpec:
    rep = cluster.representative
    if rep is None:
        raise ValueError("cluster has no representative yet")
    keep = toolset[rep]
    if len(cluster.members) == 1:
        return keep
    prune = [toolset[m] for m in _in_toolset_order(cluster.pruned, toolset)]
    try:
        signature, description = merger.merge(keep, prune)
        if not (signature or "").strip() or not (description or "").strip():
            raise EmptySynthesis(f"doc merger returned a blank signature or description for {rep!r}")
    except ToolScopeError:
        if fallback:
            log.warning("doc synthesis failed for %s; keeping its original documentation", rep)
            return keep
        raise
    except Exception as exc:
        if fallback:
            log.warning("doc synthesis failed for %s; keeping its original documentation", rep)
            return keep
        raise MergerLLMError(f"doc merger failed on {rep!r}: {exc}") from exc
    return ToolSpec(name=keep.name, signature=signature.strip(), description=description.strip(), id=keep.id)


# --- merge plan -------------------------------------------------------------------


@dataclass(frozen=True)
class MergePlan:
    clusters: tuple[Cluster, ...]
    phi: Mapping[str, str]
    merged_docs: Mapping[str, ToolSpec] = field(default_factory=dict)
    audit_log: tuple[AuditRecord, ...] = ()

    @classmethod
    def from_clusters(cls, clusters: Sequence[Cluster], tool_ids: Sequence[str], merged_docs=None, audit_log=()) -> "MergePlan":
        phi = {t: t for t in tool_ids}
        for c in clusters:
            for m in c.members:
                phi[m] = c.representative
        plan = cls(tuple(clusters), phi, dict(merged_docs or {}), tuple(audit_log))
        plan.validate(tool_ids)
        return plan

    @classmethod
    def identity(cls, toolset: Toolset) -> "MergePlan":
        return cls.from_clusters([], toolset.ids)

    @property
    def kept(self) -> set[str]:
        return {t for t, r in self.phi.items() if t == r}

    @property
    def pruned(self) -> set[str]:
        return {t for t, r in self.phi.items() if t != r}

    def validate(self, tool_ids: Iterable[str]) -> None:
        """Raise IntegrityViolation unless phi is total, idempotent and consistent with the clusters."""
        ids = list(tool_ids)
        check_integrity(self.clusters, ids)
        missing = [t for t in ids if t not in self.phi]
        if missing:
            raise IntegrityViolation(f"merge map is not total; missing {missing[:5]}")
        extra = [t for t in self.phi if t not in set(ids)]
        if extra:
            raise PlanMismatch(f"merge map references unknown tools {extra[:5]}")
        in_cluster: dict[str, Cluster] = {}
        for c in self.clusters:
            if c.representative is None:
                raise IntegrityViolation(f"cluster {list(c.members)} has no representative")
            for m in c.members:
                in_cluster[m] = c
        for t, r in self.phi.items():
            if r not in self.phi:
                raise PlanMismatch(f"phi({t!r}) = {r!r}, which is not a tool")
            if self.phi[r] != r:
                raise IntegrityViolation(f"tool {r!r} is both kept (phi({t!r})) and pruned (phi({r!r}) = {self.phi[r]!r})")
            c = in_cluster.get(t)
            expected = c.representative if c is not None else t
            if r != expected:
                raise IntegrityViolation(f"phi({t!r}) = {r!r} but its cluster representative is {expected!r}")
        for rep in self.merged_docs:
            if rep not in self.kept:
                raise IntegrityViolation(f"merged doc for {rep!r}, which is not a kept tool")

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {"members": list(c.members), "representative": c.representative, "verdict": c.verdict} for c in self.clusters
            ],
            "phi": dict(self.phi),
            "merged_docs": {k: {**v.to_dict(), "id": v.id} for k, v in self.merged_docs.items()},
            "audit_log": [r.to_dict() for r in self.audit_log],
        }

    @classmethod
    def from_dict(cls, d: dict, tool_ids: Iterable[str] | None = None) -> "MergePlan":
        clusters = tuple(
            Cluster(tuple(c["members"]), c.get("representative"), c.get("verdict", UNAUDITED)) for c in d.get("clusters", [])
        )
        docs = {k: ToolSpec.from_dict(v) for k, v in d.get("merged_docs", {}).items()}
        audit = tuple(AuditRecord.from_dict(r) for r in d.get("audit_log", []))
        plan = cls(clusters, dict(d["phi"]), docs, audit)
        plan.validate(list(d["phi"]) if tool_ids is None else tool_ids)
        return plan


def build_merge_plan(
    toolset: Toolset,
    matrix: EmbeddingMatrix,
    config: MergerConfig,
    classifier: PairClassifier,
    validator: ClusterValidator | None,
    merger: DocMerger,
) -> MergePlan:
    stage = "candidates"
    try:
        pairs = generate_candidates(matrix, config)
        log.info("%d candidate pairs at threshold %.2f", len(pairs), config.cosine_threshold)
        stage = "classify"
        graph = classify_pairs(pairs, toolset, classifier, config.workers)
        stage = "components"
        clusters = connected_components(graph)
        audit: list[AuditRecord] = []
        if config.autocorrect_enabled and validator is not None and clusters:
            stage = "autocorrect"
            clusters, audit = autocorrect_with_audit(clusters, toolset, validator, config.workers)
        stage = "prune"
        clusters = [Cluster(c.members, choose_representative(c, toolset), c.verdict) for c in clusters]
        stage = "synthesize"
        docs = {c.representative: synthesize_merged_doc(c, toolset, merger, config.doc_fallback) for c in clusters}
        stage = "integrity"
        return MergePlan.from_clusters(clusters, toolset.ids, docs, audit)
    except ToolScopeError as exc:
        raise exc.with_stage(stage)


def apply_merge(toolset: Toolset, plan: MergePlan) -> Toolset:
    unknown = [t for t in plan.phi if t not in toolset]
    if unknown or len(plan.phi) != len(toolset):
        raise PlanMismatch(f"plan does not match toolset (unknown ids: {unknown[:5]})")
    kept = []
    for t in toolset:
        if plan.phi[t.id] == t.id:
            kept.append(plan.merged_docs.get(t.id, t))
    return Toolset(tuple(kept), source_label=f"{toolset.source_label}+merged")


def relabel_benchmark(benchmark: Benchmark, plan: MergePlan) -> Benchmark:
    records = []
    for r in benchmark:
        gold: list[str] = []
        for t in r.gold_tools:
            if t not in plan.phi:
                raise UnknownGoldTool(r.query_id, t)
            mapped = plan.phi[t]
            if mapped not in gold:
                gold.append(mapped)
        records.append(QueryRecord(r.query_id, r.query, tuple(gold), r.subqueries))
    return Benchmark(tuple(records))


def size_summary(original: int, merged: int) -> tuple[int, int, float]:
    """(original, merged, percent change)."""
    pct = 0.0 if original == 0 else (merged - original) / original * 100.0
    return original, merged, pct


def format_size_table(label: str, original: int, merged: int) -> str:
    _, _, pct = size_summary(original, merged)
    rows = [("Dataset", "Original Size", "Merged Size", "% Change"), (label, str(original), str(merged), f"{pct:.1f}%")]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)
