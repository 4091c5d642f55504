"""Embedding providers, the embedding matrix and exact cosine neighbour search."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .core import Toolset, doc_text
from .errors import IndexOutOfRange, KTooLarge, ProviderError, ZeroVector
from .http import DEFAULT_API_KEY_ENV, DiskCache, auth_headers, post_json, sha256_hex, slug

MOCK_DIM = 256
_MOCK_PERSON = b"toolscope-3gram"


class EmbeddingProvider(Protocol):
    model_id: str

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def mock_embed(text: str, d: int = MOCK_DIM) -> np.ndarray:
    """Hashed character 3-gram counts of ``text.lower()``, L2-normalized.

    Buckets come from keyed BLAKE2b, so vectors are identical on every platform.
    Empty text yields the zero vector.
    """
    if d < 8:
        raise ValueError("mock embedding dimension must be >= 8")
    text = text.lower()
    vec = np.zeros(d, dtype=np.float64)
    if not text:
        return vec
    grams = [text[i : i + 3] for i in range(len(text) - 2)] or [text]
    for g in grams:
        h = hashlib.blake2b(g.encode("utf-8"), digest_size=8, person=_MOCK_PERSON).digest()
        vec[int.from_bytes(h, "little") % d] += 1.0
    return vec / np.linalg.norm(vec)


class MockEmbeddingProvider:
    def __init__(self, dim: int = MOCK_DIM):
        self.dim = dim
        self.model_id = f"mock-3gram-{dim}"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([mock_embed(t, self.dim) for t in texts])


class HttpEmbeddingProvider:
    """Client for OpenAI-compatible ``POST {base}/embeddings`` endpoints.

    Vectors are cached on disk as ``<cache_dir>/<model>/<sha256(text)>.json``,
    each holding ``{"model", "text_sha256", "vector"}``.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        cache_dir=None,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        batch_size: int = 32,
        max_workers: int = 4,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
        sleep=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_id = model
        self.cache = DiskCache(cache_dir) if cache_dir else None
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.max_workers = max_workers
        self.max_retries = max_retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep
        self._memo: dict[str, np.ndarray] = {}

    def _post_batch(self, texts: list[str]) -> list[list[float]]:
        kwargs = {} if self._sleep is None else {"sleep": self._sleep}
        data = post_json(
            self.client,
            f"{self.base_url}/embeddings",
            {"model": self.model_id, "input": texts},
            headers=auth_headers(self.api_key_env),
            max_retries=self.max_retries,
            backoff=self.backoff,
            **kwargs,
        )
        try:
            items = sorted(data["data"], key=lambda it: it.get("index", 0))
            vectors = [it["embedding"] for it in items]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"unexpected embeddings response shape: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        return vectors

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        ns = slug(self.model_id)
        out: list[np.ndarray | None] = []
        missing: list[str] = []
        for t in texts:
            vec = self._memo.get(t)
            if vec is None and self.cache is not None:
                hit = self.cache.get(ns, sha256_hex(t))
                if hit is not None:
                    vec = np.asarray(hit["vector"], dtype=np.float64)
                    self._memo[t] = vec
            out.append(vec)
            if vec is None and t not in missing:
                missing.append(t)

        chunks = [missing[i : i + self.batch_size] for i in range(0, len(missing), self.batch_size)]
        with ThreadPoolExecutor(max_workers=max(1, self.max_workers)) as pool:
            results = list(pool.map(self._post_batch, chunks))
        for chunk, vectors in zip(chunks, results):
            for t, v in zip(chunk, vectors):
                vec = np.asarray(v, dtype=np.float64)
                self._memo[t] = vec
                if self.cache is not None:
                    self.cache.put(ns, sha256_hex(t), {"model": self.model_id, "text_sha256": sha256_hex(t), "vector": list(map(float, v))})
        return np.stack([self._memo[t] for t in texts]) if texts else np.zeros((0, 0))


@dataclass(frozen=True)
class EmbeddingMatrix:
    vectors: np.ndarray
    tool_ids: tuple[str, ...]
    model_id: str
    normalized: bool = True

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.tool_ids):
            raise ValueError(f"matrix shape {vectors.shape} does not match {len(self.tool_ids)} tool ids")
        if self.normalized:
            norms = np.linalg.norm(vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("rows of a normalized matrix must have unit L2 norm")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "tool_ids", tuple(self.tool_ids))
        object.__setattr__(self, "_pos", {t: i for i, t in enumerate(self.tool_ids)})
        # rank of each id in lexicographic order, used as the cosine tie-break
        order = sorted(range(len(self.tool_ids)), key=self.tool_ids.__getitem__)
        ranks = np.empty(len(order), dtype=np.int64)
        ranks[order] = np.arange(len(order))
        object.__setattr__(self, "_id_rank", ranks)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def position(self, tool_id: str) -> int:
        return self._pos[tool_id]

    def row(self, tool_id: str) -> np.ndarray:
        return self.vectors[self._pos[tool_id]]

    def subset(self, tool_ids: Sequence[str]) -> "EmbeddingMatrix":
        idx = [self._pos[t] for t in tool_ids]
        return EmbeddingMatrix(self.vectors[idx], tuple(tool_ids), self.model_id, self.normalized)


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("embedding provider returned an all-zero vector")
    return vectors / norms


def embed_texts(texts: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    vectors = np.asarray(provider.embed_batch(list(texts)), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(texts):
        raise ProviderError(f"provider returned array of shape {vectors.shape} for {len(texts)} texts")
    return normalize_rows(vectors)


def embed_toolset(toolset: Toolset, provider: EmbeddingProvider) -> EmbeddingMatrix:
    if len(toolset) == 0:
        raise ValueError("cannot embed an empty toolset")
    vectors = embed_texts([doc_text(t) for t in toolset], provider)
    return EmbeddingMatrix(vectors, tuple(toolset.ids), provider.model_id, normalized=True)


def embed_query(text: str, provider: EmbeddingProvider) -> np.ndarray:
    return embed_texts([text], provider)[0]


def _ranked(matrix: EmbeddingMatrix, scores: np.ndarray, candidates: np.ndarray, k: int) -> list[int]:
    """Indices of the ``k`` best candidates by (score desc, tool_id asc)."""
    cand_scores = scores[candidates]
    if k < len(candidates):
        kth = np.partition(cand_scores, len(cand_scores) - k)[len(cand_scores) - k]
        keep = cand_scores >= kth
        candidates, cand_scores = candidates[keep], cand_scores[keep]
    order = np.lexsort((matrix._id_rank[candidates], -cand_scores))
    return [int(i) for i in candidates[order][:k]]


def top_k_neighbors(matrix: EmbeddingMatrix, row_index: int, k: int) -> list[tuple[str, float]]:
    """Exact top-``k`` cosine neighbours of one row, excluding the row itself."""
    n = matrix.n
    if not 0 <= row_index < n:
        raise IndexOutOfRange(f"row {row_index} outside [0, {n})")
    if k < 1 or k > n - 1:
        raise KTooLarge(f"k={k} must lie in [1, {n - 1}]")
    scores = np.clip(matrix.vectors @ matrix.vectors[row_index], -1.0, 1.0)
    candidates = np.delete(np.arange(n), row_index)
    return [(matrix.tool_ids[i], float(scores[i])) for i in _ranked(matrix, scores, candidates, k)]


def cosine_scores(matrix: EmbeddingMatrix, vector: np.ndarray) -> np.ndarray:
    return np.clip(matrix.vectors @ vector, -1.0, 1.0)
