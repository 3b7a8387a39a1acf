"""Model gateway: the only module that talks to LLM and embedding backends.

Two implementations share one interface: HttpGateway speaks the
chat-completions wire protocol (POST {base}/chat/completions and
POST {base}/embeddings), and MockGateway replays a deterministic fixture
(ordinal scripted replies and/or content-regex rules) with hash-derived
embedding vectors. Everything downstream is backend-agnostic.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import (
    BackendError,
    ContextTooLong,
    DimensionMismatch,
    EmptyText,
    FixtureExhausted,
    FixtureParse,
    InvalidConfig,
    InvalidRequest,
    RetriesExhausted,
    Timeout,
)

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: tuple[str, ...] | None = None

    def validate(self) -> None:
        if not self.messages:
            raise InvalidRequest("messages must be non-empty")
        if self.messages[0].role not in ("system", "user"):
            raise InvalidRequest("first message role must be system or user")
        for m in self.messages:
            if m.role not in _ROLES:
                raise InvalidRequest(f"unknown role '{m.role}'")
            if m.role in ("system", "user") and not m.content:
                raise InvalidRequest(f"{m.role} message content must be non-empty")
        if self.temperature < 0:
            raise InvalidRequest("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise InvalidRequest("max_tokens must be positive")


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class ChatReply:
    text: str
    usage: Usage
    latency_ms: float
    retries: int = 0


@dataclass(frozen=True)
class EmbeddingVector:
    """A finite float vector; gateways return these L2-normalized."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise InvalidConfig("embedding vector must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise InvalidConfig("embedding vector values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


def normalized(values: list[float] | tuple[float, ...]) -> EmbeddingVector:
    """L2-normalize; the mandatory client-side step for backend vectors."""
    norm = math.sqrt(sum(v * v for v in values))
    if norm == 0.0:
        raise BackendError("backend returned a zero embedding vector")
    return EmbeddingVector(values=tuple(v / norm for v in values))


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    embed_base_url: str | None = None
    embed_model: str = "default-embed"
    api_key: str | None = None
    timeout_ms: int = 30000
    max_retries: int = 3
    parallelism: int = 8
    embed_dim: int | None = None
    backoff_base_ms: float = 200.0

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise InvalidConfig("timeout_ms must be positive")
        if self.max_retries < 0:
            raise InvalidConfig("max_retries must be >= 0")
        if self.parallelism < 1:
            raise InvalidConfig("parallelism must be >= 1")

    @classmethod
    def from_env(cls, env: dict | None = None, **overrides) -> "GatewayConfig":
        env = dict(os.environ if env is None else env)
        kwargs: dict = {}
        if env.get("LLM_BASE_URL"):
            kwargs["base_url"] = env["LLM_BASE_URL"]
        if env.get("LLM_MODEL"):
            kwargs["model"] = env["LLM_MODEL"]
        if env.get("EMBED_BASE_URL"):
            kwargs["embed_base_url"] = env["EMBED_BASE_URL"]
        if env.get("EMBED_MODEL"):
            kwargs["embed_model"] = env["EMBED_MODEL"]
        if env.get("LLM_API_KEY"):
            kwargs["api_key"] = env["LLM_API_KEY"]
        if env.get("GATEWAY_TIMEOUT_MS"):
            kwargs["timeout_ms"] = int(env["GATEWAY_TIMEOUT_MS"])
        if env.get("GATEWAY_MAX_RETRIES"):
            kwargs["max_retries"] = int(env["GATEWAY_MAX_RETRIES"])
        if env.get("GATEWAY_PARALLELISM"):
            kwargs["parallelism"] = int(env["GATEWAY_PARALLELISM"])
        kwargs.update(overrides)
        return cls(**kwargs)


class Gateway:
    """Interface both backends implement."""

    model_name: str = "unknown"
    embed_model_name: str = "unknown"

    def chat(self, request: ChatRequest) -> ChatReply:
        raise NotImplementedError

    def embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


_CONTEXT_MARKERS = ("context_length_exceeded", "maximum context", "context window")


class HttpGateway(Gateway):
    """Chat-completions protocol client with retry and parallelism limits.

    Transport errors and HTTP 5xx are retried with exponential backoff up
    to max_retries extra attempts; 4xx fails fast (ContextTooLong when the
    body signals a context-length problem).
    """

    def __init__(self, config: GatewayConfig | None = None) -> None:
        self.config = config or GatewayConfig()
        self.model_name = self.config.model
        self.embed_model_name = self.config.embed_model
        self._semaphore = threading.Semaphore(self.config.parallelism)
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        self._client = httpx.Client(
            timeout=self.config.timeout_ms / 1000.0, headers=headers
        )

    def close(self) -> None:
        self._client.close()

    def _post_with_retries(self, url: str, body: dict) -> tuple[dict, int]:
        """Returns (response json, retries used)."""
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt > 0:
                time.sleep(self.config.backoff_base_ms * (2 ** (attempt - 1)) / 1000.0)
            try:
                with self._semaphore:
                    response = self._client.post(url, json=body)
            except httpx.TimeoutException as exc:
                if self.config.max_retries == 0:
                    raise Timeout(f"request to {url} timed out") from exc
                last_error = exc
                continue
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendError(
                    f"HTTP {response.status_code} from {url}",
                    status=response.status_code,
                )
                continue
            if response.status_code >= 400:
                excerpt = response.text[:200]
                if any(marker in excerpt.lower() for marker in _CONTEXT_MARKERS):
                    raise ContextTooLong(excerpt)
                raise BackendError(
                    f"HTTP {response.status_code} from {url}: {excerpt}",
                    status=response.status_code,
                )
            try:
                return response.json(), attempt
            except ValueError as exc:
                raise BackendError(f"non-JSON response from {url}") from exc
        raise RetriesExhausted(
            f"{attempts} attempt(s) to {url} failed; last error: {last_error}"
        ) from last_error

    def chat(self, request: ChatRequest) -> ChatReply:
        request.validate()
        body: dict = {
            "model": self.config.model,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        started = time.perf_counter()
        payload, retries = self._post_with_retries(
            f"{self.config.base_url.rstrip('/')}/chat/completions", body
        )
        latency_ms = (time.perf_counter() - started) * 1000.0
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed chat response payload") from exc
        usage = payload.get("usage") or {}
        return ChatReply(
            text=text,
            usage=Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
            latency_ms=latency_ms,
            retries=retries,
        )

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        base = (self.config.embed_base_url or self.config.base_url).rstrip("/")
        payload, _ = self._post_with_retries(
            f"{base}/embeddings",
            {"model": self.config.embed_model, "input": text},
        )
        try:
            values = payload["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed embeddings response payload") from exc
        if self.config.embed_dim is not None and len(values) != self.config.embed_dim:
            raise DimensionMismatch(
                f"backend returned dim {len(values)}, expected {self.config.embed_dim}"
            )
        return normalized([float(v) for v in values])


def hash_vector(text: str, dim: int) -> EmbeddingVector:
    """Deterministic pseudo-random unit vector from a stable content hash."""
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        digest = hashlib.sha256(f"{counter}:{text}".encode("utf-8")).digest()
        for i in range(0, len(digest) - 7, 8):
            word = int.from_bytes(digest[i : i + 8], "big")
            values.append(word / 2**64 * 2.0 - 1.0)
            if len(values) == dim:
                break
        counter += 1
    if all(v == 0.0 for v in values):  # vanishing chance; keep normalizable
        values[0] = 1.0
    return normalized(values)


@dataclass(frozen=True)
class _Rule:
    pattern: re.Pattern
    reply: str


class MockGateway(Gateway):
    """Deterministic fixture-driven backend for tests and offline runs.

    Rules (content regexes) are checked in order against the concatenated
    message contents; the first match wins and rules are reusable. When no
    rule matches, the next ordinal scripted reply is consumed. Embeddings
    are hash-derived unit vectors, identical for byte-equal text.
    """

    def __init__(self, fixture: dict, fingerprint: str | None = None) -> None:
        if not isinstance(fixture, dict):
            raise FixtureParse("fixture must be a JSON object")
        known = {"dim", "replies", "rules", "usage"}
        unknown = set(fixture) - known
        if unknown:
            raise FixtureParse(f"unknown fixture keys: {sorted(unknown)}")
        self._dim = fixture.get("dim", 32)
        if not isinstance(self._dim, int) or self._dim < 1:
            raise FixtureParse("dim must be a positive integer")
        replies = fixture.get("replies", [])
        if not isinstance(replies, list) or not all(
            isinstance(r, str) for r in replies
        ):
            raise FixtureParse("replies must be a list of strings")
        self._replies: list[str] = list(replies)
        self._rules: list[_Rule] = []
        for i, rule in enumerate(fixture.get("rules", [])):
            if not isinstance(rule, dict) or "pattern" not in rule or "reply" not in rule:
                raise FixtureParse(f"rule {i} must have 'pattern' and 'reply'")
            try:
                compiled = re.compile(rule["pattern"], re.S)
            except re.error as exc:
                raise FixtureParse(f"rule {i} pattern does not compile: {exc}") from exc
            self._rules.append(_Rule(pattern=compiled, reply=str(rule["reply"])))
        usage = fixture.get("usage") or {}
        self._usage = (
            Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            )
            if usage
            else None
        )
        if fingerprint is None:
            canonical = json.dumps(fixture, sort_keys=True, ensure_ascii=True)
            fingerprint = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
        self.model_name = f"mock-{fingerprint}"
        self.embed_model_name = f"mock-embed-{self._dim}"
        self._lock = threading.Lock()
        self.chat_calls = 0
        self.embed_calls = 0

    def chat(self, request: ChatRequest) -> ChatReply:
        request.validate()
        rendered = "\n\n".join(m.content for m in request.messages)
        with self._lock:
            self.chat_calls += 1
            text: str | None = None
            for rule in self._rules:
                if rule.pattern.search(rendered):
                    text = rule.reply
                    break
            if text is None:
                if not self._replies:
                    raise FixtureExhausted(
                        "no rule matched and scripted replies are exhausted"
                    )
                text = self._replies.pop(0)
        usage = self._usage or Usage(
            prompt_tokens=len(rendered) // 4, completion_tokens=len(text) // 4
        )
        return ChatReply(text=text, usage=usage, latency_ms=0.0, retries=0)

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
        with self._lock:
            self.embed_calls += 1
        return hash_vector(text, self._dim)


def make_mock_backend(fixture: dict | str | Path) -> MockGateway:
    """Build a MockGateway from a fixture dict or a JSON fixture file."""
    if isinstance(fixture, (str, Path)):
        path = Path(fixture)
        if not path.is_file():
            raise FixtureParse(f"fixture file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise FixtureParse(f"fixture is not valid JSON: {exc}") from exc
        return MockGateway(data)
    return MockGateway(fixture)
