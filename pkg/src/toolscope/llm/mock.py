"""Deterministic offline stand-in for the chat model.

Each role is answered by a fixed rule over the structured ``context`` that the
role adapters attach to their requests:

* classifier: candidate name iff both names share a canonical token set
* auto-correction: MERGE_OK iff all names share a canonical token multiset,
  otherwise a split by that multiset
* doc merger: keep's signature, distinct descriptions joined by " | "
* agent: candidate whose doc text has the highest mock-embedding cosine with the step
* quality grader: number of documented fields, clipped to 1..5
"""

from __future__ import annotations

import json
from typing import Mapping

from ..core import ToolSpec, doc_text
from ..embedding import MOCK_DIM, mock_embed
from ..names import DEFAULT_SYNONYMS, group_by_token_multiset, same_token_set
from . import prompts
from .client import ChatRequest
from .parsing import MERGE_BAD, MERGE_OK


def _tool(d: Mapping) -> ToolSpec:
    return ToolSpec.from_dict(dict(d))


def mock_chat(request: ChatRequest, synonyms: Mapping[str, str] | None = None, dim: int = MOCK_DIM) -> str:
    table = DEFAULT_SYNONYMS if synonyms is None else synonyms
    ctx = request.context
    tid = request.template_id
    if tid == prompts.H1_CLASSIFIER:
        target, candidate = _tool(ctx["target"]), _tool(ctx["candidate"])
        if same_token_set(target.name, candidate.name, table):
            return f"{candidate.name}\nBoth names reduce to the same action and object."
        return "None\nThe names describe different actions or objects."
    if tid == prompts.H2_AUTOCORRECT:
        members = [_tool(m) for m in ctx["members"]]
        groups = group_by_token_multiset(((t.id, t.name) for t in members), table)
        if len(groups) == 1:
            return json.dumps({"merge": MERGE_OK, "reason": "All functions share one intent."}, indent=2)
        return json.dumps({"merge": MERGE_BAD, "clusters": groups, "reason": "Intents differ between groups."}, indent=2)
    if tid == prompts.H3_DOC_MERGER:
        keep = _tool(ctx["keep"])
        descs: list[str] = []
        for t in [keep, *(_tool(p) for p in ctx["prune"])]:
            if t.description and t.description not in descs:
                descs.append(t.description)
        return f"{prompts.signature_of(keep)}\n{' | '.join(descs)}"
    if tid == prompts.H4_AGENT_SELECT:
        candidates = [_tool(c) for c in ctx["candidates"]]
        if not candidates:
            return "None"
        q = mock_embed(ctx["step"], dim)
        scores = [float(q @ mock_embed(doc_text(c), dim)) * 10.0 for c in candidates]
        best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
        return candidates[best].name
    if tid == prompts.H5_DOC_QUALITY:
        tool = _tool(ctx["tool"])
        score = 1 + bool(tool.signature) + bool(tool.description) + (len(tool.description.split()) >= 8) + ("(" in tool.signature and ":" in tool.signature)
        return f"{min(score, 5)}\nScored from which documentation fields are present."
    raise ValueError(f"mock_chat cannot answer template {tid!r}")


class MockChatBackend:
    def __init__(self, synonyms: Mapping[str, str] | None = None, dim: int = MOCK_DIM):
        self.synonyms = synonyms
        self.dim = dim
        self.calls = 0

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        return mock_chat(request, self.synonyms, self.dim)
