"""Strict parsers for the replies of each prompt role."""

from __future__ import annotations

import json
import re
import textwrap
from dataclasses import dataclass
from typing import Collection, Iterable

from ..errors import AgentHallucination, BadJson, EmptySynthesis, ForeignId, OverlappingSubclusters, UnparseableReply

MERGE_OK = "MERGE_OK"
MERGE_BAD = "MERGE_BAD"

_FENCE = re.compile(r"```[A-Za-z0-9_-]*\s*\n?(.*?)```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    m = _FENCE.search(text)
    if m:
        return m.group(1).strip()
    return text.strip().strip("`").strip()


@dataclass(frozen=True)
class Verdict:
    kind: str
    sub_clusters: tuple[tuple[str, ...], ...] = ()
    reason: str = ""

    def __post_init__(self) -> None:
        if self.kind not in (MERGE_OK, MERGE_BAD):
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        subs = tuple(tuple(c) for c in self.sub_clusters)
        object.__setattr__(self, "sub_clusters", subs)
        if self.kind == MERGE_BAD:
            if not subs:
                raise ValueError("MERGE_BAD requires at least one sub-cluster")
            seen: set[str] = set()
            for c in subs:
                if seen.intersection(c) or len(set(c)) != len(c):
                    raise OverlappingSubclusters(f"sub-clusters overlap: {list(map(list, subs))}")
                seen.update(c)

    @property
    def ok(self) -> bool:
        return self.kind == MERGE_OK

    def to_dict(self) -> dict:
        if self.ok:
            return {"merge": MERGE_OK, "reason": self.reason}
        return {"merge": MERGE_BAD, "clusters": [list(c) for c in self.sub_clusters], "reason": self.reason}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return json.loads(strip_code_fences(text))
    except json.JSONDecodeError as exc:
        raise BadJson(f"validator reply is not JSON ({exc})", text) from exc


def parse_verdict(text: str, member_ids: Collection[str]) -> Verdict:
    """Parse an auto-correction reply, checking sub-clusters against the members."""
    obj = _loads(text)
    if not isinstance(obj, dict):
        raise BadJson("validator reply must be a JSON object", text)
    kind = obj.get("merge")
    reason = obj.get("reason", "")
    if not isinstance(reason, str):
        reason = str(reason)
    if kind == MERGE_OK:
        return Verdict(MERGE_OK, (), reason)
    if kind != MERGE_BAD:
        raise BadJson(f"unknown merge value {kind!r}", text)
    clusters = obj.get("clusters")
    if not isinstance(clusters, list) or not clusters:
        raise BadJson("MERGE_BAD reply needs a non-empty 'clusters' list", text)
    members = {str(m) for m in member_ids}
    subs = []
    for c in clusters:
        if not isinstance(c, list) or not c:
            raise BadJson(f"malformed sub-cluster {c!r}", text)
        ids = tuple(str(x) for x in c)
        foreign = [i for i in ids if i not in members]
        if foreign:
            raise ForeignId(f"sub-cluster ids {foreign} are not members of the audited cluster")
        subs.append(ids)
    return Verdict(MERGE_BAD, tuple(subs), reason)


def parse_classifier_reply(text: str, candidate_name: str) -> tuple[int, str]:
    lines = text.strip().splitlines()
    first = lines[0].strip() if lines else ""
    rationale = "\n".join(l.strip() for l in lines[1:]).strip()
    if first == candidate_name:
        return 1, rationale
    if first == "None":
        return 0, rationale
    raise UnparseableReply(f"line 1 is neither {candidate_name!r} nor 'None'", text)


def parse_merger_reply(text: str) -> tuple[str, str]:
    """Split a doc-merger reply into (signature, description)."""
    body = strip_code_fences(text)
    lines = body.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise EmptySynthesis("doc merger returned an empty reply")
    signature = lines[0].strip()
    if signature.startswith("def "):
        signature = signature[4:]
    signature = signature.rstrip(":").strip()
    doc = textwrap.dedent("\n".join(lines[1:])).strip()
    for q in ('"""', "'''"):
        if doc.startswith(q) and doc.endswith(q) and len(doc) >= 6:
            doc = doc[3:-3].strip()
    if not signature or not doc:
        raise EmptySynthesis(f"doc merger reply lacks a signature or docstring: {text!r}")
    return signature, doc


def parse_agent_reply(text: str, candidate_names: Iterable[str]) -> str | None:
    """Return the chosen tool name, or None when the agent declines."""
    names = list(candidate_names)
    lines = [l for l in text.strip().splitlines() if l.strip()]
    first = lines[0].strip().strip("`'\"").strip() if lines else ""
    if first.endswith("()"):
        first = first[:-2]
    if first in ("None", ""):
        return None
    if first not in names:
        raise AgentHallucination(first, names)
    return first
