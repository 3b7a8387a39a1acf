"""Recursive character splitting of documents into overlapping chunks.

The splitter first atomizes a document into pieces by trying separator
regexes in order (sentence boundary, paragraph break, post-'}' marker,
newline, space, character-level), recursing with the next separator on
any piece still larger than chunk_size. Separator text stays attached to
the tail of the piece it terminates, so pieces tile the document exactly
and every chunk's text is the parent substring at its span.

Pieces are then merged greedily into chunks of at most chunk_size
characters. Consecutive chunks overlap by up to chunk_overlap characters:
the next chunk starts at the earliest piece boundary of the previous
chunk that keeps the overlap within budget (and the next piece within
chunk_size), falling back to zero overlap when no boundary qualifies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InvalidConfig
from .ingest import SourceDocument

# "" means character-level: hard split at chunk_size
DEFAULT_SEPARATORS: tuple[str, ...] = (
    r"(?<=\.)\s+",
    r"\n\s*\n",
    r"(?<=\})\s*",
    r"\n",
    r" ",
    "",
)


@dataclass(frozen=True)
class SplitConfig:
    chunk_size: int = 200
    chunk_overlap: int = 30
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise InvalidConfig("chunk_size must be positive")
        if self.chunk_overlap < 0:
            raise InvalidConfig("chunk_overlap must be non-negative")
        if self.chunk_overlap >= self.chunk_size:
            raise InvalidConfig("chunk_overlap must be smaller than chunk_size")
        if len(self.separators) == 0:
            raise InvalidConfig("separators must be non-empty")
        for pattern in self.separators:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise InvalidConfig(f"bad separator regex {pattern!r}: {exc}") from exc


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of a document.

    text == parent.text[span[0]:span[1]]; seq_id is the 0-based position
    in document order; metadata inherits the document's map plus seq_id.
    """

    doc_id: str
    seq_id: int
    text: str
    span: tuple[int, int]
    metadata: dict[str, str] = field(default_factory=dict)


def _hard_slices(start: int, end: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(s + size, end)) for s in range(start, end, size)]


def _interior_points(pattern: re.Pattern, text: str, start: int, end: int) -> list[int]:
    points: list[int] = []
    last = start
    for m in pattern.finditer(text, start, end):
        p = m.end()
        if p <= last or p >= end:
            continue
        points.append(p)
        last = p
    return points


def _atomize(
    text: str,
    start: int,
    end: int,
    level: int,
    patterns: list[re.Pattern | None],
    size: int,
) -> list[tuple[int, int]]:
    """Split [start, end) into tiling pieces of at most size characters."""
    if end - start <= size:
        return [(start, end)]
    points: list[int] = []
    while level < len(patterns):
        pattern = patterns[level]
        if pattern is None:
            return _hard_slices(start, end, size)
        points = _interior_points(pattern, text, start, end)
        if points:
            break
        level += 1
    if not points:
        return _hard_slices(start, end, size)

    bounds = [start, *points, end]
    pieces: list[tuple[int, int]] = []
    for s, e in zip(bounds, bounds[1:]):
        if e - s <= size:
            pieces.append((s, e))
        else:
            pieces.extend(_atomize(text, s, e, level + 1, patterns, size))
    return pieces


def _merge(pieces: list[tuple[int, int]], cfg: SplitConfig) -> list[tuple[int, int]]:
    """Greedily merge tiling pieces into chunk spans with bounded overlap."""
    spans: list[tuple[int, int]] = []
    i = 0
    cur_start = pieces[0][0]
    n = len(pieces)
    while i < n:
        taken: list[int] = []
        j = i
        while j < n and pieces[j][1] - cur_start <= cfg.chunk_size:
            taken.append(j)
            j += 1
        if not taken:  # unreachable with tiling pieces; guard against loops
            taken = [i]
            cur_start = pieces[i][0]
            j = i + 1
        cur_end = pieces[taken[-1]][1]
        spans.append((cur_start, cur_end))
        if j >= n:
            break
        next_end = pieces[j][1]
        new_start = cur_end
        for k in taken:
            s_k = pieces[k][0]
            if s_k <= cur_start:
                continue
            if cur_end - s_k <= cfg.chunk_overlap and next_end - s_k <= cfg.chunk_size:
                new_start = s_k
                break
        cur_start = new_start
        i = j
    return spans


def split(doc: SourceDocument, cfg: SplitConfig | None = None) -> list[Chunk]:
    """Split a document into ordered chunks.

    Guarantees: chunk spans cover the whole text; each chunk is at most
    chunk_size characters; consecutive spans satisfy
    0 <= span[i].end - span[i+1].start <= chunk_overlap; start offsets
    strictly increase; output is a pure function of (text, config).
    """
    cfg = cfg or SplitConfig()
    if not doc.text:
        return []
    patterns: list[re.Pattern | None] = [
        re.compile(p) if p else None for p in cfg.separators
    ]
    pieces = _atomize(doc.text, 0, len(doc.text), 0, patterns, cfg.chunk_size)
    spans = _merge(pieces, cfg)
    chunks: list[Chunk] = []
    for seq_id, (s, e) in enumerate(spans):
        metadata = dict(doc.metadata)
        metadata["seq_id"] = str(seq_id)
        chunks.append(
            Chunk(
                doc_id=doc.id,
                seq_id=seq_id,
                text=doc.text[s:e],
                span=(s, e),
                metadata=metadata,
            )
        )
    return chunks
