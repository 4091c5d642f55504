"""Function-name tokenization and the synonym rule behind the mock LLM roles."""

from __future__ import annotations

import re
from collections import Counter
from typing import Mapping

# word -> canonical word
DEFAULT_SYNONYMS: dict[str, str] = {
    "calc": "calculate",
    "compute": "calculate",
    "fetch": "get",
    "retrieve": "get",
    "obtain": "get",
    "lookup": "get",
    "info": "details",
    "information": "details",
    "dispatch": "send",
    "transmit": "send",
    "remove": "delete",
    "erase": "delete",
    "make": "create",
    "new": "create",
    "find": "search",
    "query": "search",
    "modify": "update",
    "edit": "update",
    "convert": "transform",
    "img": "image",
    "pic": "image",
    "msg": "message",
    "num": "number",
    "nums": "numbers",
    "temp": "temperature",
    "doc": "document",
    "docs": "documents",
    "cfg": "config",
    "configuration": "config",
    "show": "list",
    "insert": "add",
    "put": "upload",
}

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_NON_ALNUM = re.compile(r"[^A-Za-z0-9]+")


def name_tokens(name: str) -> list[str]:
    """Split a function name on non-alphanumerics and camelCase boundaries."""
    out = []
    for part in _NON_ALNUM.split(name):
        out.extend(p.lower() for p in _CAMEL.split(part) if p)
    return out


def canonical_tokens(name: str, synonyms: Mapping[str, str] | None = None) -> list[str]:
    table = DEFAULT_SYNONYMS if synonyms is None else synonyms
    return [table.get(t, t) for t in name_tokens(name)]


def same_token_set(a: str, b: str, synonyms: Mapping[str, str] | None = None) -> bool:
    return set(canonical_tokens(a, synonyms)) == set(canonical_tokens(b, synonyms))


def token_multiset_key(name: str, synonyms: Mapping[str, str] | None = None) -> tuple:
    return tuple(sorted(Counter(canonical_tokens(name, synonyms)).items()))


def group_by_token_multiset(items, synonyms: Mapping[str, str] | None = None) -> list[list[str]]:
    """Group ``(id, name)`` pairs by canonical token multiset, keeping input order."""
    groups: dict[tuple, list[str]] = {}
    for tid, name in items:
        groups.setdefault(token_multiset_key(name, synonyms), []).append(tid)
    return list(groups.values())
