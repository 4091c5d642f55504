"""Shared HTTP plumbing: JSON POST with retry/backoff and an atomic disk cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from pathlib import Path
from typing import Callable

import httpx

from .errors import ApiError, Timeout, TransportError

log = logging.getLogger(__name__)

RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})
DEFAULT_API_KEY_ENV = "TOOLSCOPE_API_KEY"


def auth_headers(api_key_env: str = DEFAULT_API_KEY_ENV) -> dict[str, str]:
    key = os.environ.get(api_key_env, "").strip()
    headers = {"Content-Type": "application/json"}
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def post_json(
    client: httpx.Client,
    url: str,
    body: dict,
    headers: dict[str, str] | None = None,
    max_retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> dict:
    """POST ``body`` and return the decoded JSON response.

    Retries up to ``max_retries`` times on 429/5xx and transport failures,
    sleeping ``backoff * 2**attempt`` between attempts.
    """
    last: Exception | None = None
    for attempt in range(max_retries + 1):
        if attempt:
            sleep(backoff * 2 ** (attempt - 1))
        try:
            resp = client.post(url, json=body, headers=headers)
        except httpx.TimeoutException as exc:
            last = Timeout(f"request to {url} timed out: {exc}")
            continue
        except httpx.HTTPError as exc:
            last = TransportError(f"request to {url} failed: {exc}")
            continue
        if resp.status_code in RETRY_STATUSES:
            last = ApiError(resp.status_code, resp.text)
            log.warning("HTTP %s from %s (attempt %d)", resp.status_code, url, attempt + 1)
            continue
        if resp.status_code >= 400:
            raise ApiError(resp.status_code, resp.text)
        try:
            return resp.json()
        except json.JSONDecodeError as exc:
            raise ApiError(resp.status_code, f"invalid JSON body: {resp.text}") from exc
    assert last is not None
    raise last


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class DiskCache:
    """One JSON file per key under ``root``; writes are temp-file-then-rename."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, namespace: str, key: str) -> Path:
        return self.root / namespace / f"{key}.json"

    def get(self, namespace: str, key: str):
        p = self.path(namespace, key)
        try:
            with open(p, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put(self, namespace: str, key: str, value) -> None:
        p = self.path(namespace, key)
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(value, fh, sort_keys=True, ensure_ascii=False)
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text)
