"""Engine configuration.

One JSON document describes a deployment: where the corpus and build
artifacts live, how documents are split, how retrieval fuses scores,
and which model gateway to talk to. Loading is strict: unknown keys at
any level fail immediately so a typo cannot silently fall back to a
default. After the file is read, KLIPA_* environment variables override
individual values. Relative paths resolve against the config file's
directory, or the current directory when no file is given.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .agent import AgentConfig
from .chunker import DEFAULT_SEPARATORS, SplitConfig
from .errors import ConfigError
from .gateway import GatewayConfig
from .retrieval import RetrievalConfig

GATEWAY_MODES = ("http", "mock")

_TOP_KEYS = {
    "corpus": "corpus",
    "schema": None,
    "cache_dir": ".klipa-cache",
    "snapshot": "graph.jsonl",
    "triples": "triples.jsonl",
    "report": "extraction-report.json",
    "index_dir": "indexes",
    "gold": None,
    "prompts_dir": None,
    "parallelism": 8,
    "split": {},
    "retrieval": {},
    "agent": {},
    "gateway": {},
    "service": {},
}

_SPLIT_KEYS = {
    "chunk_size": 200,
    "chunk_overlap": 30,
    "separators": list(DEFAULT_SEPARATORS),
}

_RETRIEVAL_KEYS = {
    "tau": 0.30,
    "top_k": 5,
    "w_vector": 0.7,
    "w_keyword": 0.3,
    "doc_aggregation": "max",
}

_AGENT_KEYS = {
    "max_steps": 6,
    "history_window": 5,
    "history_char_budget": 4000,
}

_GATEWAY_KEYS = {
    "mode": "http",
    "fixture": None,
    "base_url": "http://localhost:8000/v1",
    "model": "default",
    "embed_base_url": None,
    "embed_model": "default-embed",
    "api_key": None,
    "timeout_ms": 30000,
    "max_retries": 3,
    "parallelism": 8,
    "embed_dim": None,
    "backoff_base_ms": 200.0,
}

_SERVICE_KEYS = {
    "host": "127.0.0.1",
    "port": 8764,
    "session_log": None,
    "static_dir": None,
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8764
    session_log: Path | None = None
    static_dir: Path | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.port <= 65535):
            raise ConfigError(f"service port {self.port} out of range")


@dataclass
class EngineConfig:
    """Resolved configuration; all paths are absolute."""

    base_dir: Path
    corpus: Path
    schema: Path | None
    cache_dir: Path
    snapshot: Path
    triples: Path
    report: Path
    index_dir: Path
    gold: Path | None
    prompts_dir: Path | None
    parallelism: int
    split: SplitConfig
    retrieval: RetrievalConfig
    agent: AgentConfig
    gateway_mode: str
    mock_fixture: Path | None
    gateway: GatewayConfig
    service: ServiceConfig

    @property
    def chunk_index(self) -> Path:
        return self.index_dir / "chunk-index.jsonl"

    @property
    def document_index(self) -> Path:
        return self.index_dir / "document-index.jsonl"

    @property
    def build_lock(self) -> Path:
        # build/index exclusivity; lives with the cache, always writable
        return self.cache_dir / "build.lock"

    def use_mock(self, fixture: str | Path) -> None:
        self.gateway_mode = "mock"
        self.mock_fixture = Path(fixture).resolve()


def _merge_strict(section: str, defaults: Mapping[str, Any], given: Any) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"config section '{section}' must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def _resolve(base: Path, value: Any) -> Path | None:
    if value is None:
        return None
    p = Path(str(value))
    return p if p.is_absolute() else (base / p).resolve()


def _coerce_int(name: str, value: Any) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from exc


def _coerce_float(name: str, value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc


_ENV_PATHS = {
    "KLIPA_CORPUS": "corpus",
    "KLIPA_SCHEMA": "schema",
    "KLIPA_CACHE_DIR": "cache_dir",
    "KLIPA_SNAPSHOT": "snapshot",
    "KLIPA_TRIPLES": "triples",
    "KLIPA_REPORT": "report",
    "KLIPA_INDEX_DIR": "index_dir",
    "KLIPA_GOLD": "gold",
    "KLIPA_PROMPTS_DIR": "prompts_dir",
}

_ENV_INTS = {
    "KLIPA_PARALLELISM": ("top", "parallelism"),
    "KLIPA_CHUNK_SIZE": ("split", "chunk_size"),
    "KLIPA_CHUNK_OVERLAP": ("split", "chunk_overlap"),
    "KLIPA_TOP_K": ("retrieval", "top_k"),
    "KLIPA_MAX_STEPS": ("agent", "max_steps"),
    "KLIPA_HISTORY_WINDOW": ("agent", "history_window"),
    "KLIPA_PORT": ("service", "port"),
}

_ENV_FLOATS = {
    "KLIPA_TAU": ("retrieval", "tau"),
    "KLIPA_W_VECTOR": ("retrieval", "w_vector"),
    "KLIPA_W_KEYWORD": ("retrieval", "w_keyword"),
}

_ENV_STRINGS = {
    "KLIPA_HOST": ("service", "host"),
    "KLIPA_SESSION_LOG": ("service", "session_log"),
    "KLIPA_STATIC_DIR": ("service", "static_dir"),
    "KLIPA_GATEWAY_MODE": ("gateway", "mode"),
    "KLIPA_MOCK_FIXTURE": ("gateway", "fixture"),
}

_KNOWN_ENV = (
    set(_ENV_PATHS) | set(_ENV_INTS) | set(_ENV_FLOATS) | set(_ENV_STRINGS)
)


def _apply_env(top: dict, sections: dict[str, dict], env: Mapping[str, str]) -> None:
    for name in sorted(env):
        if not name.startswith("KLIPA_"):
            continue
        value = env[name]
        if name not in _KNOWN_ENV:
            raise ConfigError(f"unrecognized environment override {name}")
        if name in _ENV_PATHS:
            top[_ENV_PATHS[name]] = value
        elif name in _ENV_INTS:
            section, key = _ENV_INTS[name]
            target = top if section == "top" else sections[section]
            target[key] = _coerce_int(name, value)
        elif name in _ENV_FLOATS:
            section, key = _ENV_FLOATS[name]
            sections[section][key] = _coerce_float(name, value)
        else:
            section, key = _ENV_STRINGS[name]
            sections[section][key] = value
    if env.get("KLIPA_MOCK_FIXTURE"):
        sections["gateway"]["mode"] = "mock"


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> EngineConfig:
    """Load and validate a config file, then apply KLIPA_* overrides.

    Raises ConfigError for a missing/malformed file, unknown keys, or
    unparseable override values; section dataclasses raise InvalidConfig
    for semantic violations (both map to CLI exit code 2).
    """
    if path is not None:
        cfg_path = Path(path)
        if not cfg_path.is_file():
            raise ConfigError(f"config file not found: {cfg_path}")
        try:
            data = json.loads(cfg_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot parse config {cfg_path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        base_dir = cfg_path.resolve().parent
    else:
        data = {}
        base_dir = Path.cwd()

    top = _merge_strict("config", _TOP_KEYS, data)
    sections = {
        "split": _merge_strict("split", _SPLIT_KEYS, top["split"]),
        "retrieval": _merge_strict("retrieval", _RETRIEVAL_KEYS, top["retrieval"]),
        "agent": _merge_strict("agent", _AGENT_KEYS, top["agent"]),
        "gateway": _merge_strict("gateway", _GATEWAY_KEYS, top["gateway"]),
        "service": _merge_strict("service", _SERVICE_KEYS, top["service"]),
    }
    _apply_env(top, sections, dict(os.environ if env is None else env))

    gw = sections["gateway"]
    if gw["mode"] not in GATEWAY_MODES:
        raise ConfigError(f"gateway mode must be one of {GATEWAY_MODES}")
    svc = sections["service"]

    split = SplitConfig(
        chunk_size=_coerce_int("chunk_size", sections["split"]["chunk_size"]),
        chunk_overlap=_coerce_int(
            "chunk_overlap", sections["split"]["chunk_overlap"]
        ),
        separators=tuple(str(s) for s in sections["split"]["separators"]),
    )
    retrieval = RetrievalConfig(
        tau=_coerce_float("tau", sections["retrieval"]["tau"]),
        top_k=_coerce_int("top_k", sections["retrieval"]["top_k"]),
        w_vector=_coerce_float("w_vector", sections["retrieval"]["w_vector"]),
        w_keyword=_coerce_float("w_keyword", sections["retrieval"]["w_keyword"]),
        doc_aggregation=str(sections["retrieval"]["doc_aggregation"]),
    )
    agent = AgentConfig(
        max_steps=_coerce_int("max_steps", sections["agent"]["max_steps"]),
        history_window=_coerce_int(
            "history_window", sections["agent"]["history_window"]
        ),
        history_char_budget=_coerce_int(
            "history_char_budget", sections["agent"]["history_char_budget"]
        ),
    )
    gateway = GatewayConfig(
        base_url=str(gw["base_url"]),
        model=str(gw["model"]),
        embed_base_url=None if gw["embed_base_url"] is None else str(gw["embed_base_url"]),
        embed_model=str(gw["embed_model"]),
        api_key=None if gw["api_key"] is None else str(gw["api_key"]),
        timeout_ms=_coerce_int("timeout_ms", gw["timeout_ms"]),
        max_retries=_coerce_int("max_retries", gw["max_retries"]),
        parallelism=_coerce_int("parallelism", gw["parallelism"]),
        embed_dim=None if gw["embed_dim"] is None else _coerce_int("embed_dim", gw["embed_dim"]),
        backoff_base_ms=_coerce_float("backoff_base_ms", gw["backoff_base_ms"]),
    )
    service = ServiceConfig(
        host=str(svc["host"]),
        port=_coerce_int("port", svc["port"]),
        session_log=_resolve(base_dir, svc["session_log"]),
        static_dir=_resolve(base_dir, svc["static_dir"]),
    )
    return EngineConfig(
        base_dir=base_dir,
        corpus=_resolve(base_dir, top["corpus"]),
        schema=_resolve(base_dir, top["schema"]),
        cache_dir=_resolve(base_dir, top["cache_dir"]),
        snapshot=_resolve(base_dir, top["snapshot"]),
        triples=_resolve(base_dir, top["triples"]),
        report=_resolve(base_dir, top["report"]),
        index_dir=_resolve(base_dir, top["index_dir"]),
        gold=_resolve(base_dir, top["gold"]),
        prompts_dir=_resolve(base_dir, top["prompts_dir"]),
        parallelism=_coerce_int("parallelism", top["parallelism"]),
        split=split,
        retrieval=retrieval,
        agent=agent,
        gateway_mode=str(gw["mode"]),
        mock_fixture=_resolve(base_dir, gw["fixture"]),
        gateway=gateway,
        service=service,
    )
