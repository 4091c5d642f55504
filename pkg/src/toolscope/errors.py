"""Exception hierarchy.

Every error raised by the library derives from :class:`ToolScopeError`. The three
direct families map onto CLI exit codes: input problems (1), provider problems (2)
and integrity violations (3).
"""

from __future__ import annotations


class ToolScopeError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    #: pipeline stage the error surfaced in, filled in by orchestration code
    stage: str | None = None

    def with_stage(self, stage: str) -> "ToolScopeError":
        if self.stage is None:
            self.stage = stage
        return self


# --- input errors (exit 1) -------------------------------------------------


class InputError(ToolScopeError):
    exit_code = 1


class ParseError(InputError):
    pass


class DuplicateToolId(InputError):
    def __init__(self, tool_id: str):
        super().__init__(f"duplicate tool id: {tool_id!r}")
        self.tool_id = tool_id


class EmptyName(InputError):
    pass


class UnknownGoldTool(InputError):
    def __init__(self, query_id: str, tool_id: str):
        super().__init__(f"query {query_id!r} references unknown gold tool {tool_id!r}")
        self.query_id = query_id
        self.tool_id = tool_id


class UnknownTool(InputError):
    pass


class KeyMismatch(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class KTooLarge(InputError, ValueError):
    pass


class MissingSelection(InputError):
    pass


class EmptyGold(InputError):
    pass


class SchemaMismatch(InputError):
    pass


class SingleCluster(InputError, ValueError):
    pass


class MissingSlot(InputError, KeyError):
    def __init__(self, slot: str):
        super().__init__(slot)
        self.slot = slot

    def __str__(self) -> str:
        return f"missing template slot: {self.slot}"


class UnknownTemplate(InputError, KeyError):
    pass


class ConfigError(InputError):
    pass


# --- provider errors (exit 2) ----------------------------------------------


class ProviderError(ToolScopeError):
    exit_code = 2


class TransportError(ProviderError):
    pass


class ApiError(ProviderError):
    def __init__(self, status: int, body: str):
        super().__init__(f"API returned HTTP {status}: {body[:500]}")
        self.status = status
        self.body = body


class Timeout(ProviderError):
    pass


class ZeroVector(ProviderError):
    pass


class UnparseableReply(ProviderError):
    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}; raw reply: {raw!r}")
        self.raw = raw


class BadJson(UnparseableReply):
    pass


class ClassifierError(ProviderError):
    pass


class ValidatorError(ProviderError):
    pass


class MergerLLMError(ProviderError):
    pass


class EmptySynthesis(MergerLLMError):
    pass


class AgentError(ProviderError):
    pass


class AgentHallucination(AgentError):
    """The agent named a tool that was not among its candidates."""

    def __init__(self, name: str, candidates: list[str]):
        super().__init__(f"agent selected {name!r}, not in candidates")
        self.name = name
        self.candidates = candidates


# --- integrity violations (exit 3) -----------------------------------------


class IntegrityViolation(ToolScopeError):
    exit_code = 3


class ForeignId(IntegrityViolation):
    pass


class OverlappingSubclusters(IntegrityViolation):
    pass


class PlanMismatch(IntegrityViolation):
    pass
