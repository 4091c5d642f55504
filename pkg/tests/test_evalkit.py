import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import silhouette_score

from oracles import csr_recount, recall_recount
from toolscope.core import Benchmark, QueryRecord, ToolSpec
from toolscope.embedding import EmbeddingMatrix
from toolscope.errors import EmptyGold, MissingSelection, ParseError, SingleCluster
from toolscope.evalkit import (
    ABLATION_GRID,
    EvalReport,
    ablation_csv,
    context_reduction,
    context_tokens,
    csr_at_k,
    format_ablation,
    kmeans,
    recall_at_k,
    run_ablation,
    silhouette,
    silhouette_curve,
)
from toolscope.fixtures import large_toolset


def _bench(golds):
    return Benchmark(tuple(QueryRecord(f"q{i}", "x", g) for i, g in enumerate(golds)))


def _matrix(vectors, prefix="t"):
    V = np.asarray(vectors, dtype=np.float64)
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    return EmbeddingMatrix(V, tuple(f"{prefix}{i:03d}" for i in range(len(V))), "test")


# --- CSR and recall -----------------------------------------------------------------


def test_csr_thirteen_of_twenty():
    bench = _bench([("a",)] * 20)
    sel = {f"q{i}": (["a"] if i < 13 else ["b"]) for i in range(20)}
    assert csr_at_k(sel, bench) == pytest.approx(0.65, abs=1e-12)
    assert csr_at_k(sel, bench) == csr_recount(sel, {r.query_id: r.gold_tools for r in bench})


def test_csr_is_exact_set_match():
    bench = _bench([("a", "b")])
    assert csr_at_k({"q0": ["b", "a"]}, bench) == 1.0
    assert csr_at_k({"q0": ["a", "b", "a"]}, bench) == 1.0
    assert csr_at_k({"q0": ["a", "b", "c"]}, bench) == 0.0
    assert csr_at_k({"q0": ["a"]}, bench) == 0.0


def test_missing_selection_and_empty_gold():
    bench = _bench([("a",), ("b",)])
    with pytest.raises(MissingSelection):
        csr_at_k({"q0": ["a"]}, bench)
    with pytest.raises(MissingSelection):
        recall_at_k({"q1": ["a"]}, bench)
    with pytest.raises(ParseError):
        QueryRecord("q", "x", ())
    rec = QueryRecord("q", "x", ("a",))
    object.__setattr__(rec, "gold_tools", ())
    with pytest.raises(EmptyGold):
        recall_at_k({"q": ["a"]}, Benchmark((rec,)))


def test_recall_fixtures():
    bench = _bench([("a", "b"), ("c",)])
    retrieved = {"q0": ["a", "x", "b"], "q1": ["y", "c"]}
    assert recall_at_k(retrieved, bench) == 1.0
    assert recall_at_k(retrieved, bench, k=1) == pytest.approx(0.25)
    assert recall_at_k(retrieved, bench, k=2) == pytest.approx(0.75)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_recall_matches_recount_and_grows_with_k(seed):
    rng = random.Random(seed)
    pool = list("abcdefghij")
    golds = [tuple(rng.sample(pool, rng.randint(1, 3))) for _ in range(rng.randint(1, 8))]
    bench = _bench(golds)
    retrieved = {r.query_id: rng.sample(pool, 8) for r in bench}
    gold = {r.query_id: r.gold_tools for r in bench}
    prev = 0.0
    for k in range(1, 9):
        got = recall_at_k(retrieved, bench, k)
        assert got == pytest.approx(recall_recount(retrieved, gold, k), abs=1e-12)
        assert got >= prev - 1e-12
        prev = got


# --- silhouette and k-means -----------------------------------------------------------------------


def test_silhouette_two_tight_pairs():
    m = _matrix([[1, 0.01, 0], [1, -0.01, 0], [0, 1, 0.01], [0, 1, -0.01]])
    labels = {m.tool_ids[0]: 0, m.tool_ids[1]: 0, m.tool_ids[2]: 1, m.tool_ids[3]: 1}
    assert silhouette(m, labels) > 0.9


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(0)
    m = _matrix(rng.normal(size=(400, 16)))
    labels = {t: int(rng.integers(2)) for t in m.tool_ids}
    assert abs(silhouette(m, labels)) < 0.05


def test_silhouette_singletons_and_single_cluster():
    m = _matrix(np.eye(3))
    assert silhouette(m, {t: i for i, t in enumerate(m.tool_ids)}) == 0.0
    with pytest.raises(SingleCluster):
        silhouette(m, {t: 0 for t in m.tool_ids})


def test_silhouette_matches_sklearn():
    rng = np.random.default_rng(3)
    for trial in range(20):
        n = int(rng.integers(4, 60))
        m = _matrix(rng.normal(size=(n, 8)))
        c = int(rng.integers(2, min(n, 6) + 1))
        labels = rng.integers(c, size=n)
        if len(set(labels)) < 2:
            continue
        ours = silhouette(m, dict(zip(m.tool_ids, labels.tolist())))
        theirs = silhouette_score(m.vectors, labels, metric="cosine")
        assert ours == pytest.approx(theirs, abs=1e-9), trial


def test_kmeans_recovers_blobs_and_is_deterministic():
    rng = np.random.default_rng(1)
    centers = np.eye(4)[:3] * 10
    pts = np.concatenate([c + rng.normal(scale=0.1, size=(15, 4)) for c in centers])
    m = _matrix(pts)
    a = kmeans(m, 3, seed=5)
    assert a == kmeans(m, 3, seed=5)
    groups = [{a[t] for t in m.tool_ids[i * 15 : (i + 1) * 15]} for i in range(3)]
    assert all(len(g) == 1 for g in groups)
    assert len(set().union(*groups)) == 3


def test_kmeans_bounds():
    m = _matrix(np.eye(5))
    full = kmeans(m, 5)
    assert len(set(full.values())) == 5
    dup = _matrix([[1, 0], [1, 0], [1, 0], [0, 1]])
    assert len(kmeans(dup, 3)) == 4
    with pytest.raises(ValueError):
        kmeans(m, 6)
    with pytest.raises(ValueError):
        kmeans(m, 1)


def test_silhouette_curve_skips_degenerate_counts():
    rng = np.random.default_rng(2)
    m = _matrix(rng.normal(size=(10, 4)))
    curve = silhouette_curve(m, [1, 2, 3, 10, 11])
    assert sorted(curve) == [2, 3]
    assert all(-1.0 <= v <= 1.0 for v in curve.values())


# --- context accounting ---------------------------------------------------------------------


def test_context_tokens_counts_whitespace_tokens():
    # "add" + "add(a," + "b)" + "sum" + "two" + "numbers"
    assert context_tokens([ToolSpec("add", "add(a, b)", "sum two numbers")]) == 6
    assert context_tokens([]) == 0


def test_context_reduction_on_thousand_tools():
    ts = large_toolset(1000, seed=0)
    tools = list(ts)
    rng = random.Random(0)
    lists = [rng.sample(tools, 5) for _ in range(50)]
    ct = context_reduction(tools, lists)
    assert ct.original_total == context_tokens(tools)
    assert ct.retrieved_total == pytest.approx(np.mean([context_tokens(l) for l in lists]))
    assert ct.pct_reduction >= 0.95


# --- reports ----------------------------------------------------------------------------------


def test_report_tsv_and_table():
    rep = EvalReport({5: 0.5}, {1: 0.25, 5: 0.75}, [])
    assert rep.to_tsv() == "metric\tk\tvalue\ncsr\t5\t0.500000\nrecall\t1\t0.250000\nrecall\t5\t0.750000\n"
    table = rep.format_table()
    assert table.splitlines()[1].split() == ["CSR", "-", "0.500"]
    assert rep.to_dict()["recall_at_k"] == {"1": 0.25, "5": 0.75}


def test_ablation_rows(planted, mock_settings):
    ts, bench = planted
    rows = run_ablation(bench, ts, mock_settings)
    assert [(r.reranker, r.merger, r.autocorrect) for r in rows] == [(a, b, c and b) for a, b, c in ABLATION_GRID]
    full, no_merge = rows[0], rows[2]
    assert full.csr == 1.0 and full.merged_size == 20
    assert no_merge.csr == pytest.approx(0.1) and no_merge.merged_size == len(ts)
    csv = ablation_csv(rows).splitlines()
    assert csv[0] == "reranker,merger,autocorrect,csr,recall,merged_size"
    assert csv[1].startswith("1,1,1,1.000000,")
    assert format_ablation(rows, "planted").splitlines()[1].split() == ["planted", "Y", "Y", "Y", "1.000"]
