"""Role implementations (classifier, validator, doc merger, agent, grader) backed by a chat model."""

from __future__ import annotations

import re
from typing import Sequence

from ..core import ToolSpec
from ..errors import ClassifierError, MergerLLMError, UnparseableReply, ValidatorError
from . import prompts
from .client import ChatBackend, ChatRequest
from .parsing import Verdict, parse_agent_reply, parse_classifier_reply, parse_merger_reply, parse_verdict


def _tool_ctx(t: ToolSpec) -> dict:
    return {**t.to_dict(), "id": t.id}


class _ChatRole:
    def __init__(self, backend: ChatBackend, model: str = "gpt-4o", temperature: float = 0.0, max_tokens: int = 4000):
        self.backend = backend
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens

    def _ask(self, template_id: str, slots: dict, context: dict) -> str:
        req = ChatRequest.user(
            self.model,
            prompts.render(template_id, slots),
            template_id=template_id,
            context=context,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )
        return self.backend.complete(req)


class ChatClassifier(_ChatRole):
    def classify(self, target: ToolSpec, candidate: ToolSpec) -> tuple[int, str]:
        reply = self._ask(
            prompts.H1_CLASSIFIER,
            prompts.classifier_slots(target, candidate),
            {"target": _tool_ctx(target), "candidate": _tool_ctx(candidate)},
        )
        try:
            return parse_classifier_reply(reply, candidate.name)
        except UnparseableReply as exc:
            raise ClassifierError(f"classifier reply for ({target.id}, {candidate.id}) unparseable: {exc}") from exc


class ChatValidator(_ChatRole):
    def validate(self, members: Sequence[ToolSpec]) -> Verdict:
        reply = self._ask(
            prompts.H2_AUTOCORRECT,
            prompts.autocorrect_slots(members),
            {"members": [_tool_ctx(t) for t in members]},
        )
        try:
            return parse_verdict(reply, [t.id for t in members])
        except UnparseableReply as exc:
            raise ValidatorError(f"auto-correction reply unparseable: {exc}") from exc


class ChatDocMerger(_ChatRole):
    def merge(self, keep: ToolSpec, prune: Sequence[ToolSpec]) -> tuple[str, str]:
        reply = self._ask(
            prompts.H3_DOC_MERGER,
            prompts.merger_slots(keep, prune),
            {"keep": _tool_ctx(keep), "prune": [_tool_ctx(t) for t in prune]},
        )
        try:
            return parse_merger_reply(reply)
        except MergerLLMError:
            raise
        except UnparseableReply as exc:
            raise MergerLLMError(str(exc)) from exc


class ChatAgent(_ChatRole):
    def choose(self, question: str, step: str, candidates: Sequence[ToolSpec], step_ranking: Sequence[str] = ()) -> str | None:
        reply = self._ask(
            prompts.H4_AGENT_SELECT,
            prompts.agent_slots(question, step, candidates),
            {"question": question, "step": step, "candidates": [_tool_ctx(t) for t in candidates]},
        )
        return parse_agent_reply(reply, [c.name for c in candidates])


_SCORE = re.compile(r"^(?:1\.\s*)?(?:\**score\**\s*[:=]?\s*)?([1-5])\b", re.IGNORECASE)


class ChatQualityGrader(_ChatRole):
    """Documentation quality score (1-5) plus a one-line justification."""

    def grade(self, tool: ToolSpec) -> tuple[int, str]:
        reply = self._ask(prompts.H5_DOC_QUALITY, prompts.quality_slots(tool), {"tool": _tool_ctx(tool)})
        lines = [l.strip() for l in reply.strip().splitlines() if l.strip()]
        m = _SCORE.match(lines[0]) if lines else None
        if m is None:
            raise UnparseableReply("quality grader reply has no 1-5 score on line 1", reply)
        rest = lines[1] if len(lines) > 1 else ""
        return int(m.group(1)), re.sub(r"^2\.\s*", "", rest)
