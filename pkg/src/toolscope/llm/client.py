"""OpenAI-compatible chat completions client with retries and a replay cache."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Protocol

import httpx

from ..errors import ApiError
from ..http import DEFAULT_API_KEY_ENV, DiskCache, auth_headers, post_json, sha256_hex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 4000
    top_p: float = 1.0
    # provenance for logs and the mock backend; never sent over the wire
    template_id: str | None = field(default=None, compare=False)
    context: dict = field(default_factory=dict, compare=False, repr=False)

    def body(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "top_p": self.top_p,
        }

    def cache_key(self) -> str:
        return sha256_hex(json.dumps(self.body(), sort_keys=True, ensure_ascii=False, separators=(",", ":")))

    @classmethod
    def user(cls, model: str, prompt: str, template_id: str | None = None, context: dict | None = None, **kw) -> "ChatRequest":
        return cls(model, (("user", prompt),), template_id=template_id, context=context or {}, **kw)


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class HttpChatClient:
    """``POST {base_url}/chat/completions``.

    With ``cache_dir`` set, every reply is stored as
    ``<cache_dir>/chat/<sha256 of request body>.json`` holding
    ``{"request": body, "response": text}``; repeated requests are served
    from disk without touching the network.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        cache_dir=None,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
        sleep=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.cache = DiskCache(cache_dir) if cache_dir else None
        self.max_retries = max_retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self.network_calls = 0

    def complete(self, request: ChatRequest) -> str:
        key = request.cache_key()
        if self.cache is not None:
            hit = self.cache.get("chat", key)
            if hit is not None:
                return hit["response"]
        kwargs = {} if self._sleep is None else {"sleep": self._sleep}
        with self._slots:
            self.network_calls += 1
            data = post_json(
                self.client,
                f"{self.base_url}/chat/completions",
                request.body(),
                headers=auth_headers(self.api_key_env),
                max_retries=self.max_retries,
                backoff=self.backoff,
                **kwargs,
            )
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ApiError(200, f"unexpected response shape: {json.dumps(data)[:500]}") from exc
        if text is None:
            text = ""
        if self.cache is not None:
            self.cache.put("chat", key, {"request": request.body(), "response": text})
        return text


def chat(request: ChatRequest, base_url: str, api_key_env: str = DEFAULT_API_KEY_ENV, cache_dir=None, **kwargs) -> str:
    return HttpChatClient(base_url, api_key_env=api_key_env, cache_dir=cache_dir, **kwargs).complete(request)
