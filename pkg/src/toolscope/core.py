"""Domain types and file I/O for toolsets and query benchmarks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import DuplicateToolId, EmptyName, ParseError, UnknownGoldTool


@dataclass(frozen=True)
class ToolSpec:
    name: str
    signature: str = ""
    description: str = ""
    id: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise EmptyName("tool name must be a non-empty string")
        if not self.id:
            object.__setattr__(self, "id", self.name)

    def doc_text(self) -> str:
        return doc_text(self)

    def to_dict(self) -> dict:
        d = {"name": self.name, "signature": self.signature, "description": self.description}
        if self.id != self.name:
            d["id"] = self.id
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "ToolSpec":
        if not isinstance(obj, dict):
            raise ParseError(f"tool entry must be an object, got {type(obj).__name__}")
        name = obj.get("name")
        if name is None or name == "":
            raise EmptyName(f"tool entry without a name: {obj!r}")
        try:
            return cls(
                name=str(name),
                signature=str(obj.get("signature", "")),
                description=str(obj.get("description", "")),
                id=str(obj.get("id") or name),
            )
        except TypeError as exc:
            raise ParseError(str(exc)) from exc


def doc_text(tool: ToolSpec) -> str:
    """Canonical text of a tool, used for both embedding and BM25."""
    return f"{tool.name}\n{tool.signature}\n{tool.description}"


@dataclass(frozen=True)
class Toolset:
    tools: tuple[ToolSpec, ...]
    source_label: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        tools = tuple(self.tools)
        object.__setattr__(self, "tools", tools)
        index: dict[str, int] = {}
        for i, tool in enumerate(tools):
            if tool.id in index:
                raise DuplicateToolId(tool.id)
            index[tool.id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tools)

    def __iter__(self) -> Iterator[ToolSpec]:
        return iter(self.tools)

    def __contains__(self, tool_id: object) -> bool:
        return tool_id in self._index

    def __getitem__(self, tool_id: str) -> ToolSpec:
        return self.tools[self._index[tool_id]]

    def get(self, tool_id: str) -> ToolSpec | None:
        i = self._index.get(tool_id)
        return None if i is None else self.tools[i]

    def position(self, tool_id: str) -> int:
        return self._index[tool_id]

    @property
    def ids(self) -> list[str]:
        return [t.id for t in self.tools]


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    query: str
    gold_tools: tuple[str, ...]
    subqueries: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_tools", tuple(self.gold_tools))
        object.__setattr__(self, "subqueries", tuple(self.subqueries))
        if not self.gold_tools:
            raise ParseError(f"query {self.query_id!r} has no gold tools")

    @property
    def single_tool(self) -> bool:
        return len(self.subqueries) <= 1

    def steps(self) -> list[str]:
        """The texts retrieval runs on: the subqueries, or the query itself."""
        return list(self.subqueries) if self.subqueries else [self.query]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "query": self.query,
            "subqueries": list(self.subqueries),
            "gold_tools": list(self.gold_tools),
        }


@dataclass(frozen=True)
class Benchmark:
    records: tuple[QueryRecord, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        seen = set()
        for r in records:
            if r.query_id in seen:
                raise ParseError(f"duplicate query_id {r.query_id!r}")
            seen.add(r.query_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[QueryRecord]:
        return iter(self.records)

    def validate_against(self, toolset: Toolset) -> None:
        for r in self.records:
            for tid in r.gold_tools:
                if tid not in toolset:
                    raise UnknownGoldTool(r.query_id, tid)


# --- serialization ----------------------------------------------------------


def dumps_canonical(obj, indent: int | None = 2) -> str:
    """Sorted-key JSON; UTF-8 text, no trailing whitespace."""
    if indent is None:
        return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=indent)


def write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_json(path: str | Path, obj) -> None:
    write_text(path, dumps_canonical(obj) + "\n")


def write_jsonl(path: str | Path, rows: Iterable) -> None:
    write_text(path, "".join(dumps_canonical(r, indent=None) + "\n" for r in rows))


def read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def read_jsonl(path: str | Path) -> list:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return rows


def toolset_from_dicts(items: Sequence[dict], source_label: str = "") -> Toolset:
    if not isinstance(items, list):
        raise ParseError("toolset file must contain a JSON array")
    return Toolset(tuple(ToolSpec.from_dict(it) for it in items), source_label=source_label)


def load_toolset(path: str | Path) -> Toolset:
    return toolset_from_dicts(read_json(path), source_label=str(path))


def save_toolset(toolset: Toolset, path: str | Path) -> None:
    write_json(path, [t.to_dict() for t in toolset])


def record_from_dict(obj: dict) -> QueryRecord:
    try:
        gold = obj["gold_tools"]
        subqueries = obj.get("subqueries") or []
        if isinstance(gold, str) or isinstance(subqueries, str):
            raise ParseError("gold_tools and subqueries must be lists")
        return QueryRecord(
            query_id=str(obj["query_id"]),
            query=str(obj["query"]),
            gold_tools=tuple(str(g) for g in gold),
            subqueries=tuple(str(s) for s in subqueries),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed query record {obj!r}: {exc}") from exc


def load_benchmark(path: str | Path, toolset: Toolset | None = None) -> Benchmark:
    bench = Benchmark(tuple(record_from_dict(o) for o in read_jsonl(path)))
    if toolset is not None:
        bench.validate_against(toolset)
    return bench


def save_benchmark(benchmark: Benchmark, path: str | Path) -> None:
    write_jsonl(path, (r.to_dict() for r in benchmark))
