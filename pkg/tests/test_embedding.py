import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolscope.core import ToolSpec, Toolset
from toolscope.embedding import (
    EmbeddingMatrix,
    HttpEmbeddingProvider,
    MockEmbeddingProvider,
    embed_toolset,
    mock_embed,
    top_k_neighbors,
)
from toolscope.errors import ApiError, IndexOutOfRange, KTooLarge, ZeroVector

# frozen from the 3-gram hash; any change to hashing or bucketing breaks these
GOLDEN_TRIANGLE_COSINE = 0.8986182904354194
GOLDEN_HELLO_SHA256 = "f2fac4d7e300cd1eef508c9e8a8855d2620b470bb849633089cf1ac90f9167e7"


def _matrix(vecs, ids=None):
    vecs = np.asarray(vecs, dtype=float)
    vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    ids = ids or [f"t{i:02d}" for i in range(len(vecs))]
    return EmbeddingMatrix(vecs, tuple(ids), "test")


def _oracle_neighbors(matrix, i, k):
    # full O(n) sort of every other row; same dot-product expression, so ties compare exactly
    scores = np.clip(matrix.vectors @ matrix.vectors[i], -1.0, 1.0)
    rows = [(matrix.tool_ids[j], float(scores[j])) for j in range(matrix.n) if j != i]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:k]


def test_mock_embed_goldens():
    import hashlib

    a = mock_embed("calculate_area triangle base height")
    b = mock_embed("calculate_triangle_area base height")
    assert float(a @ b) == pytest.approx(GOLDEN_TRIANGLE_COSINE, abs=1e-12)
    assert float(a @ b) > 0.6
    assert float(mock_embed("translate text") @ mock_embed("send email")) < 0.4
    assert hashlib.sha256(mock_embed("hello world").tobytes()).hexdigest() == GOLDEN_HELLO_SHA256


def test_mock_embed_basic():
    assert np.array_equal(mock_embed("same text"), mock_embed("same text"))
    assert np.linalg.norm(mock_embed("abc", 8)) == pytest.approx(1.0)
    assert not mock_embed("").any()
    with pytest.raises(ValueError):
        mock_embed("x", 4)


def test_embed_toolset_rows_normalized_and_identical_docs_equal():
    ts = Toolset((ToolSpec("f", "f()", "same"), ToolSpec("g", "g(x)", "other"), ToolSpec("h", "h()", "third text")))
    m = embed_toolset(ts, MockEmbeddingProvider())
    assert m.vectors.shape == (3, 256)
    assert np.allclose(np.linalg.norm(m.vectors, axis=1), 1.0, atol=1e-6)
    twins = Toolset((ToolSpec("a", "", "dup"), ToolSpec("a", "", "dup", id="b")))
    m2 = embed_toolset(twins, MockEmbeddingProvider())
    assert np.array_equal(m2.vectors[0], m2.vectors[1])


def test_zero_vector_rejected():
    class Zeros:
        model_id = "zeros"

        def embed_batch(self, texts):
            return np.zeros((len(texts), 4))

    with pytest.raises(ZeroVector):
        embed_toolset(Toolset((ToolSpec("a"),)), Zeros())


def test_top_k_identity_and_orthogonal_cases():
    m = _matrix([[1, 0, 0], [0, 1, 0], [1, 0, 0]], ["a", "b", "c"])
    assert top_k_neighbors(m, 0, 1) == [("c", 1.0)]
    e = _matrix(np.eye(3), ["e1", "e2", "e3"])
    assert top_k_neighbors(e, 0, 2) == [("e2", 0.0), ("e3", 0.0)]


def test_top_k_errors():
    m = _matrix(np.eye(3))
    with pytest.raises(IndexOutOfRange):
        top_k_neighbors(m, 3, 1)
    with pytest.raises(KTooLarge):
        top_k_neighbors(m, 0, 3)
    with pytest.raises(KTooLarge):
        top_k_neighbors(m, 0, 0)


def test_top_k_matches_full_sort_on_ten_random_vectors():
    rng = np.random.default_rng(7)
    m = _matrix(rng.normal(size=(10, 6)))
    for i in range(10):
        got = top_k_neighbors(m, i, 5)
        want = _oracle_neighbors(m, i, 5)
        assert got == want


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 64),
    d=st.integers(2, 8),
    seed=st.integers(0, 10_000),
    coarse=st.booleans(),
)
def test_top_k_is_prefix_of_full_sort(n, d, seed, coarse):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(n, d))
    if coarse:
        # few distinct directions, so ties on cosine are common
        vecs = np.round(vecs).clip(-1, 1)
        vecs[~vecs.any(axis=1)] = 1.0
    m = _matrix(vecs)
    i = int(rng.integers(n))
    k = int(rng.integers(1, n))
    got = top_k_neighbors(m, i, k)
    full = _oracle_neighbors(m, i, n - 1)
    assert got == full[:k]
    assert all(-1.0 <= c <= 1.0 for _, c in got)


@settings(max_examples=50, deadline=None)
@given(st.text(min_size=1, max_size=40), st.text(min_size=1, max_size=40))
def test_cosine_properties(a, b):
    va, vb = mock_embed(a), mock_embed(b)
    assert float(va @ va) == pytest.approx(1.0)
    assert float(va @ vb) == pytest.approx(float(vb @ va))
    assert abs(float(va @ vb)) <= 1 + 1e-9


# --- HTTP provider ---------------------------------------------------------------


def _embedding_server(calls, fail_first=0):
    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        if len(calls) <= fail_first:
            return httpx.Response(503, text="busy")
        body = calls[-1]
        data = [{"index": i, "embedding": [float(len(t)), 1.0, 0.5]} for i, t in enumerate(body["input"])]
        return httpx.Response(200, json={"data": data[::-1]})

    return httpx.Client(transport=httpx.MockTransport(handler))


def test_http_provider_batches_retries_and_caches(tmp_path):
    calls = []
    prov = HttpEmbeddingProvider(
        "http://emb.test/v1", "m/1", cache_dir=tmp_path, client=_embedding_server(calls, fail_first=1), sleep=lambda s: None
    )
    out = prov.embed_batch(["ab", "abcd", "ab"])
    assert out.shape == (3, 3)
    assert out[0][0] == 2.0 and out[1][0] == 4.0
    assert len(calls) == 2 and calls[-1] == {"model": "m/1", "input": ["ab", "abcd"]}
    files = sorted((tmp_path / "m_1").glob("*.json"))
    assert len(files) == 2
    entry = json.loads(files[0].read_text())
    assert set(entry) == {"model", "text_sha256", "vector"}
    # a fresh provider over the same cache never touches the network
    calls2 = []
    prov2 = HttpEmbeddingProvider("http://emb.test/v1", "m/1", cache_dir=tmp_path, client=_embedding_server(calls2))
    assert np.array_equal(prov2.embed_batch(["abcd", "ab"]), out[[1, 0]])
    assert calls2 == []


def test_http_provider_gives_up_after_retries():
    calls = []
    prov = HttpEmbeddingProvider("http://emb.test", "m", client=_embedding_server(calls, fail_first=99), sleep=lambda s: None)
    with pytest.raises(ApiError):
        prov.embed_batch(["x"])
    assert len(calls) == 4
