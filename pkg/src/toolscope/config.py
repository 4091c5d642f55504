"""Run configuration (TOML or JSON file plus flag overrides) and run manifests."""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path
from typing import Any, Mapping

import httpx

from .core import dumps_canonical, write_json
from .errors import ConfigError, Timeout, TransportError
from .merger import MergerConfig
from .pipeline import Settings
from .retriever import RetrieverConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class RunConfig:
    toolset: str | None = None
    benchmark: str | None = None
    out: str = "out"
    settings: Settings = field(default_factory=Settings)

    def to_dict(self) -> dict:
        # output location is left out so that manifests do not depend on where a run was written
        s = asdict(self.settings)
        return {"settings": s}

    def digest(self) -> str:
        return hashlib.sha256(dumps_canonical(self.to_dict(), indent=None).encode("utf-8")).hexdigest()


def read_config_file(path: str | Path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            return json.loads(raw.decode("utf-8"))
        return tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config {p}: {exc}") from exc


def _section(cls, data: Mapping[str, Any], name: str):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Layout: ``[paths]``, ``[merger]``, ``[retriever]``, ``[providers]`` and a top-level ``seed``."""
    data = dict(data)
    paths = dict(data.pop("paths", {}))
    merger = _section(MergerConfig, data.pop("merger", {}), "merger")
    retriever = _section(RetrieverConfig, data.pop("retriever", {}), "retriever")
    providers = dict(data.pop("providers", {}))
    seed = data.pop("seed", 0)
    if data:
        raise ConfigError(f"unknown top-level config key(s): {sorted(data)}")
    settings = _section(Settings, {**providers, "seed": seed}, "providers")
    settings = replace(settings, merger=merger, retriever=retriever)
    extra = set(paths) - {"toolset", "benchmark", "out"}
    if extra:
        raise ConfigError(f"unknown key(s) in [paths]: {sorted(extra)}")
    return RunConfig(paths.get("toolset"), paths.get("benchmark"), paths.get("out", "out"), settings)


def apply_overrides(cfg: RunConfig, merger: Mapping[str, Any] = (), retriever: Mapping[str, Any] = (), **top) -> RunConfig:
    """Keys whose value is None are ignored, so unset CLI flags leave the file's values alone."""
    merger = {k: v for k, v in dict(merger).items() if v is not None}
    retriever = {k: v for k, v in dict(retriever).items() if v is not None}
    top = {k: v for k, v in top.items() if v is not None}
    s = cfg.settings
    try:
        s = replace(s, merger=replace(s.merger, **merger), retriever=replace(s.retriever, **retriever))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    paths = {k: top.pop(k) for k in ("toolset", "benchmark", "out") if k in top}
    if top:
        s = replace(s, **top)
    return replace(cfg, settings=s, **paths)


def check_reachable(settings: Settings, client: httpx.Client | None = None, timeout: float = 10.0) -> None:
    """Live mode only: every configured endpoint must answer HTTP (any status) on ``GET {base}/models``."""
    if settings.mock:
        return
    client = client or httpx.Client(timeout=timeout)
    for base in dict.fromkeys(u for u in (settings.embedding_base_url, settings.chat_base_url) if u):
        url = base.rstrip("/") + "/models"
        try:
            client.get(url)
        except httpx.TimeoutException as exc:
            raise Timeout(f"endpoint {base} did not answer: {exc}").with_stage("startup")
        except httpx.HTTPError as exc:
            raise TransportError(f"endpoint {base} unreachable: {exc}").with_stage("startup")


# --- manifests ---------------------------------------------------------------------


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _version(dist: str) -> str | None:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return None


def tool_versions() -> dict[str, str | None]:
    from . import __version__

    return {
        "toolscope": __version__,
        "python": platform.python_version(),
        "numpy": _version("numpy"),
        "httpx": _version("httpx"),
        "matplotlib": _version("matplotlib"),
    }


def write_manifest(out_dir: str | Path, command: str, cfg: RunConfig, inputs: Mapping[str, str | Path], outputs) -> Path:
    """``manifest_<command>.json``: config hash, input hashes by role, output hashes, versions.

    No timestamps or absolute paths, so identical runs give identical manifests.
    """
    out = Path(out_dir)
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "inputs": {role: {"file": Path(p).name, "sha256": file_sha256(p)} for role, p in sorted(inputs.items()) if p},
        "outputs": {Path(p).name: file_sha256(p) for p in sorted(outputs, key=lambda x: Path(x).name)},
        "versions": tool_versions(),
    }
    path = out / f"manifest_{command}.json"
    write_json(path, manifest)
    return path
