"""Prompt templates for the five LLM roles and helpers that format their slots."""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from ..core import ToolSpec
from ..errors import MissingSlot, UnknownTemplate

H1_CLASSIFIER = "H1_classifier"
H2_AUTOCORRECT = "H2_autocorrect"
H3_DOC_MERGER = "H3_doc_merger"
H4_AGENT_SELECT = "H4_agent_select"
H5_DOC_QUALITY = "H5_doc_quality"
TEMPLATE_IDS = (H1_CLASSIFIER, H2_AUTOCORRECT, H3_DOC_MERGER, H4_AGENT_SELECT, H5_DOC_QUALITY)

# JSON examples in the templates never match this, so only true slots are substituted.
SLOT = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@lru_cache(maxsize=None)
def template_text(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise UnknownTemplate(template_id)
    return resources.files(__package__).joinpath("templates", f"{template_id}.txt").read_text(encoding="utf-8").rstrip("\n")


def template_slots(template_id: str) -> list[str]:
    return list(dict.fromkeys(SLOT.findall(template_text(template_id))))


def render(template_id: str, slots: Mapping[str, str]) -> str:
    text = template_text(template_id)
    for name in template_slots(template_id):
        if name not in slots:
            raise MissingSlot(name)
    # single pass: slot values are never re-scanned for placeholders
    return SLOT.sub(lambda m: str(slots[m.group(1)]), text)


def signature_of(tool: ToolSpec) -> str:
    return tool.signature or f"{tool.name}()"


def tool_docstring(tool: ToolSpec) -> str:
    return f"{signature_of(tool)} — {tool.description}"


def group_block(members: Sequence[ToolSpec]) -> str:
    """``ID : signature — doc`` lines for the auto-correction prompt."""
    return "\n".join(f"{t.id} : {signature_of(t)} — {t.description}" for t in members)


def function_block(tool: ToolSpec) -> str:
    return f'def {signature_of(tool)}:\n    """{tool.description}"""'


def keep_block(tool: ToolSpec) -> str:
    return "Function to keep:\n" + function_block(tool)


def prune_block(tools: Sequence[ToolSpec]) -> str:
    return "\nFunctions to merge into it:\n" + "\n\n".join(function_block(t) for t in tools)


def tools_block(tools: Sequence[ToolSpec]) -> str:
    """Candidate tools as JSON objects, one block per tool, in the given order."""
    return "\n".join(
        json.dumps({"name": t.name, "signature": signature_of(t), "description": t.description}, indent=2, ensure_ascii=False)
        for t in tools
    )


def classifier_slots(target: ToolSpec, candidate: ToolSpec) -> dict[str, str]:
    return {"target_tool_docstring": tool_docstring(target), "candidate_tool_docstring": tool_docstring(candidate)}


def autocorrect_slots(members: Sequence[ToolSpec]) -> dict[str, str]:
    return {"GROUP_BLOCK": group_block(members)}


def merger_slots(keep: ToolSpec, prune: Sequence[ToolSpec]) -> dict[str, str]:
    return {"keep_name": keep.name, "keep_block": keep_block(keep), "prune_block": prune_block(prune)}


def agent_slots(question: str, step: str, candidates: Sequence[ToolSpec]) -> dict[str, str]:
    return {"question": question, "input": step, "tools": tools_block(candidates)}


def quality_slots(tool: ToolSpec) -> dict[str, str]:
    return {"tool_name": tool.name, "tool_signature": signature_of(tool), "tool_description": tool.description}
