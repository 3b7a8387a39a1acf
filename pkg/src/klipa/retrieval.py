"""Hybrid retrieval over chunk-level and document-level indexes.

Vector search is an exact exhaustive scan (cosine against every item,
threshold tau, ties broken by id); keyword search is TF-IDF over
lowercase alphanumeric tokens; hybrid fusion min-max normalizes each
source list to [0, 1] and combines them with configured weights. No
approximate structures: corpora here are small enough that exactness is
cheap, and it keeps the ranking auditable.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .chunker import Chunk
from .errors import (
    DimensionMismatch,
    EmptyIndex,
    GatewayError,
    IndexMissing,
    IndexParse,
    InvalidConfig,
    ZeroVector,
)
from .gateway import EmbeddingVector, Gateway

CHUNK_LEVEL = "chunk"
DOCUMENT_LEVEL = "document"
LEVELS = (CHUNK_LEVEL, DOCUMENT_LEVEL)

INDEX_VERSION = 1

DOC_TEXT_BUDGET = 2000


@dataclass(frozen=True)
class RetrievalConfig:
    tau: float = 0.30
    top_k: int = 5
    w_vector: float = 0.7
    w_keyword: float = 0.3
    doc_aggregation: str = "max"

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfig("tau must be in [0, 1]")
        if self.top_k < 1:
            raise InvalidConfig("top_k must be >= 1")
        if self.w_vector < 0 or self.w_keyword < 0:
            raise InvalidConfig("fusion weights must be non-negative")
        if abs(self.w_vector + self.w_keyword - 1.0) > 1e-9:
            raise InvalidConfig("fusion weights must sum to 1")
        if self.doc_aggregation != "max":
            raise InvalidConfig("doc_aggregation must be 'max'")


@dataclass(frozen=True)
class IndexedItem:
    id: str
    level: str
    vector: EmbeddingVector
    text: str
    metadata: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ScoredHit:
    id: str
    score: float
    source: str
    level: str


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity; raises DimensionMismatch or ZeroVector."""
    if u.dim != v.dim:
        raise DimensionMismatch(f"dims {u.dim} and {v.dim} differ")
    dot = sum(a * b for a, b in zip(u.values, v.values))
    norm_u = u.norm()
    norm_v = v.norm()
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return dot / (norm_u * norm_v)


def chunk_item_id(doc_id: str, seq_id: int) -> str:
    """Index id for a chunk; zero-padded so string order is corpus order."""
    return f"{doc_id}#{seq_id:04d}"


_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


class Index:
    """Items sorted by id, with cached token counts for keyword scoring."""

    def __init__(self, level: str, dim: int, embed_model: str, items: list[IndexedItem]):
        if level not in LEVELS:
            raise InvalidConfig(f"level must be one of {LEVELS}")
        if not items:
            raise EmptyIndex(f"no items for {level} index")
        for item in items:
            if item.vector.dim != dim:
                raise DimensionMismatch(
                    f"item '{item.id}' has dim {item.vector.dim}, index uses {dim}"
                )
        self.level = level
        self.dim = dim
        self.embed_model = embed_model
        self.items: list[IndexedItem] = sorted(items, key=lambda it: it.id)
        self._by_id = {item.id: item for item in self.items}
        if len(self._by_id) != len(self.items):
            raise InvalidConfig("item ids must be unique")
        self._token_counts: list[Counter] | None = None

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._by_id

    def get(self, item_id: str) -> IndexedItem | None:
        return self._by_id.get(item_id)

    def token_counts(self) -> list[Counter]:
        if self._token_counts is None:
            self._token_counts = [Counter(tokenize(item.text)) for item in self.items]
        return self._token_counts

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "version": INDEX_VERSION,
                        "level": self.level,
                        "dim": self.dim,
                        "embed_model": self.embed_model,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            for item in self.items:
                fh.write(
                    json.dumps(
                        {
                            "id": item.id,
                            "level": item.level,
                            "vector": list(item.vector.values),
                            "text": item.text,
                            "metadata": dict(item.metadata),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(str(path))
        header: dict | None = None
        items: list[IndexedItem] = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except ValueError as exc:
                    raise IndexParse(f"line {line_no} is not valid JSON: {exc}") from exc
                if header is None:
                    if not isinstance(data, dict) or "version" not in data:
                        raise IndexParse("line 1 must be a header with 'version'")
                    if data["version"] != INDEX_VERSION:
                        raise IndexParse(f"unsupported index version {data['version']}")
                    header = data
                    continue
                try:
                    items.append(
                        IndexedItem(
                            id=str(data["id"]),
                            level=str(data["level"]),
                            vector=EmbeddingVector(
                                values=tuple(float(v) for v in data["vector"])
                            ),
                            text=str(data["text"]),
                            metadata=tuple(
                                sorted(
                                    (str(k), str(v))
                                    for k, v in (data.get("metadata") or {}).items()
                                )
                            ),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise IndexParse(f"line {line_no} is malformed: {exc}") from exc
        if header is None:
            raise IndexParse("index file is empty")
        return cls(
            level=str(header["level"]),
            dim=int(header["dim"]),
            embed_model=str(header.get("embed_model", "")),
            items=items,
        )


def build_index(
    chunks: list[Chunk],
    level: str,
    gateway: Gateway,
    doc_text_budget: int = DOC_TEXT_BUDGET,
) -> tuple[Index, list[str]]:
    """Embed chunks (chunk level) or per-document chunk concatenations
    truncated to doc_text_budget (document level). Per-item gateway
    failures are recorded and skipped; EmptyIndex if nothing embeds."""
    if level not in LEVELS:
        raise InvalidConfig(f"level must be one of {LEVELS}")
    failures: list[str] = []
    entries: list[tuple[str, str, tuple[tuple[str, str], ...]]] = []
    if level == CHUNK_LEVEL:
        for chunk in chunks:
            entries.append(
                (
                    chunk_item_id(chunk.doc_id, chunk.seq_id),
                    chunk.text,
                    tuple(sorted(chunk.metadata.items())),
                )
            )
    else:
        grouped: dict[str, list[Chunk]] = {}
        for chunk in chunks:
            grouped.setdefault(chunk.doc_id, []).append(chunk)
        for doc_id in sorted(grouped):
            ordered = sorted(grouped[doc_id], key=lambda c: c.seq_id)
            text = "\n".join(c.text for c in ordered)[:doc_text_budget]
            metadata = {"source": ordered[0].metadata.get("source", doc_id)}
            entries.append((doc_id, text, tuple(sorted(metadata.items()))))

    items: list[IndexedItem] = []
    dim: int | None = None
    for item_id, text, metadata in entries:
        try:
            vector = gateway.embed(text)
        except GatewayError as exc:
            failures.append(f"{item_id}: {exc}")
            continue
        if dim is None:
            dim = vector.dim
        items.append(
            IndexedItem(
                id=item_id, level=level, vector=vector, text=text, metadata=metadata
            )
        )
    if not items or dim is None:
        raise EmptyIndex(
            f"no items could be embedded for the {level} index "
            f"({len(failures)} failure(s))"
        )
    return Index(level=level, dim=dim, embed_model=gateway.embed_model_name, items=items), failures


def vector_search(
    index: Index, query_vector: EmbeddingVector, top_k: int, tau: float = 0.0
) -> list[ScoredHit]:
    """Exhaustive scan: cosine against every item, keep score >= tau,
    order by (score desc, id asc), return at most top_k."""
    if query_vector.dim != index.dim:
        raise DimensionMismatch(
            f"query dim {query_vector.dim} does not match index dim {index.dim}"
        )
    scored = []
    for item in index.items:
        score = cosine(query_vector, item.vector)
        if score >= tau:
            scored.append((score, item.id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        ScoredHit(id=item_id, score=score, source="vector", level=index.level)
        for score, item_id in scored[:top_k]
    ]


def keyword_search(index: Index, query: str, top_k: int) -> list[ScoredHit]:
    """TF-IDF scoring: sum over query terms of tf(term, item) * ln(N/df).

    Terms absent from the corpus contribute nothing; items sharing no
    term with the query are excluded even when their score would be 0.
    """
    terms = tokenize(query)
    if not terms:
        return []
    counts = index.token_counts()
    n_items = len(index.items)
    df: dict[str, int] = {}
    for term in set(terms):
        df[term] = sum(1 for c in counts if term in c)
    scored = []
    for item, item_counts in zip(index.items, counts):
        overlap = any(item_counts.get(term, 0) > 0 for term in terms)
        if not overlap:
            continue
        score = 0.0
        for term in terms:
            tf = item_counts.get(term, 0)
            if tf == 0 or df[term] == 0:
                continue
            score += tf * math.log(n_items / df[term])
        scored.append((score, item.id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        ScoredHit(id=item_id, score=score, source="keyword", level=index.level)
        for score, item_id in scored[:top_k]
    ]


def _minmax(hits: list[ScoredHit]) -> dict[str, float]:
    """Normalize scores to [0, 1]; a constant list (including a single
    hit) maps everything to 1.0."""
    if not hits:
        return {}
    lo = min(h.score for h in hits)
    hi = max(h.score for h in hits)
    if hi == lo:
        return {h.id: 1.0 for h in hits}
    return {h.id: (h.score - lo) / (hi - lo) for h in hits}


def hybrid_retrieve(
    index: Index, query: str, gateway: Gateway, cfg: RetrievalConfig
) -> list[ScoredHit]:
    """Run both sources, min-max normalize each, fuse with the configured
    weights (missing source contributes 0), order by (fused desc, id asc).

    A source with weight 0 is skipped entirely, so degenerate weights
    reproduce the other source's ranking exactly.
    """
    vector_hits: list[ScoredHit] = []
    keyword_hits: list[ScoredHit] = []
    if cfg.w_vector > 0:
        query_vector = gateway.embed(query)
        vector_hits = vector_search(index, query_vector, cfg.top_k, cfg.tau)
    if cfg.w_keyword > 0:
        keyword_hits = keyword_search(index, query, cfg.top_k)
    vector_norm = _minmax(vector_hits)
    keyword_norm = _minmax(keyword_hits)
    fused: dict[str, float] = {}
    for item_id in set(vector_norm) | set(keyword_norm):
        fused[item_id] = cfg.w_vector * vector_norm.get(
            item_id, 0.0
        ) + cfg.w_keyword * keyword_norm.get(item_id, 0.0)
    ranked = sorted(fused.items(), key=lambda pair: (-pair[1], pair[0]))
    return [
        ScoredHit(id=item_id, score=score, source="fused", level=index.level)
        for item_id, score in ranked[: cfg.top_k]
    ]


@dataclass
class IndexSet:
    """The retrieval surface the agent and service talk to."""

    chunk: Index | None = None
    document: Index | None = None

    def index_for(self, level: str) -> Index:
        if level not in LEVELS:
            raise InvalidConfig(f"level must be one of {LEVELS}")
        index = self.chunk if level == CHUNK_LEVEL else self.document
        if index is None:
            raise IndexMissing(level)
        return index

    def retrieve(
        self, level: str, query: str, gateway: Gateway, cfg: RetrievalConfig
    ) -> list[ScoredHit]:
        return hybrid_retrieve(self.index_for(level), query, gateway, cfg)
