"""Corpus loading and document normalization.

Turns files on disk (plain text, HTML, pre-extracted PDF text) into
SourceDocument records with stable ids, normalized UTF-8 text, and a
metadata map that always carries the origin path under "source".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path

from .errors import EmptyCorpus, EmptyDocument, ManifestParse, UnsupportedFormat

PLAIN = "plain"
HTML = "html"
PDF_TEXT = "pdf-text"

FORMATS = (PLAIN, HTML, PDF_TEXT)

# extensions recognized during directory scans; everything else is skipped
_EXTENSION_FORMATS = (
    (".pdf.txt", PDF_TEXT),
    (".pdftxt", PDF_TEXT),
    (".html", HTML),
    (".htm", HTML),
    (".txt", PLAIN),
    (".text", PLAIN),
)


@dataclass(frozen=True)
class SourceDocument:
    """One normalized input document.

    id is a stable string key (path relative to the corpus root, or the
    manifest path as written); text contains no raw control characters
    other than newline and tab; metadata always includes "source".
    """

    id: str
    format: str
    text: str
    metadata: dict[str, str]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class LoadFailure:
    """A per-file failure recorded (not raised) during corpus load."""

    ref: str
    error: str


@dataclass
class CorpusLoad:
    documents: list[SourceDocument] = field(default_factory=list)
    failures: list[LoadFailure] = field(default_factory=list)


def detect_format(name: str) -> str:
    lowered = name.lower()
    for suffix, fmt in _EXTENSION_FORMATS:
        if lowered.endswith(suffix):
            return fmt
    raise UnsupportedFormat(f"unrecognized extension on '{name}'")


_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "br", "caption", "dd",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav",
    "ol", "p", "pre", "section", "table", "tbody", "td", "tfoot", "th",
    "thead", "title", "tr", "ul",
}
_SKIP_TAGS = {"script", "style"}
_BREAK = "\x00"


class _HtmlTextExtractor(HTMLParser):
    """Collects text content; block tags mark paragraph breaks, script and
    style subtrees are dropped entirely, inline tags contribute nothing."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append(_BREAK)

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK_TAGS:
            self.parts.append(_BREAK)

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS:
            if self._skip_depth > 0:
                self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self.parts.append(_BREAK)

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0:
            self.parts.append(data)


def html_to_text(markup: str) -> str:
    """Extract readable text: block boundaries become blank lines, runs of
    whitespace inside a block collapse to single spaces."""
    extractor = _HtmlTextExtractor()
    extractor.feed(markup)
    extractor.close()
    segments = "".join(extractor.parts).split(_BREAK)
    cleaned = [" ".join(seg.split()) for seg in segments]
    return "\n\n".join(seg for seg in cleaned if seg)


def _strip_control(text: str) -> str:
    return "".join(
        ch for ch in text if ch in "\n\t" or (ord(ch) >= 32 and ord(ch) != 127)
    )


def parse_document(
    path: str | Path,
    format_hint: str | None = None,
    doc_id: str | None = None,
    extra_metadata: dict[str, str] | None = None,
) -> SourceDocument:
    """Parse one file into a SourceDocument.

    Raises FileNotFoundError, UnsupportedFormat, or EmptyDocument.
    Invalid UTF-8 byte sequences become U+FFFD and record a warning.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    if format_hint is not None:
        if format_hint not in FORMATS:
            raise UnsupportedFormat(f"unknown format hint '{format_hint}'")
        fmt = format_hint
    else:
        fmt = detect_format(p.name)

    raw = p.read_bytes()
    warnings: list[str] = []
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        text = raw.decode("utf-8", errors="replace")
        warnings.append("invalid UTF-8 byte sequences replaced with U+FFFD")

    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if fmt == HTML:
        text = html_to_text(text)
    text = _strip_control(text)
    if not text.strip():
        raise EmptyDocument(f"'{p}' has no content after normalization")

    metadata = {"source": p.as_posix()}
    if extra_metadata:
        for key, value in extra_metadata.items():
            if key != "source":
                metadata[str(key)] = str(value)

    return SourceDocument(
        id=doc_id if doc_id is not None else p.as_posix(),
        format=fmt,
        text=text,
        metadata=metadata,
        warnings=tuple(warnings),
    )


def _load_directory(root: Path) -> CorpusLoad:
    result = CorpusLoad()
    for f in sorted(root.rglob("*")):
        if not f.is_file():
            continue
        try:
            detect_format(f.name)
        except UnsupportedFormat:
            continue
        rel_id = f.relative_to(root).as_posix()
        try:
            result.documents.append(parse_document(f, doc_id=rel_id))
        except Exception as exc:  # per-file failures degrade, never abort
            result.failures.append(LoadFailure(ref=rel_id, error=str(exc)))
    return result


def _load_manifest(manifest: Path) -> CorpusLoad:
    result = CorpusLoad()
    base = manifest.parent
    with open(manifest, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            ref = f"{manifest.name}:{line_no}"
            try:
                entry = json.loads(line)
                if not isinstance(entry, dict) or "path" not in entry:
                    raise ValueError("manifest entry must be an object with 'path'")
            except ValueError as exc:
                bad = ManifestParse(f"manifest line {line_no}: {exc}", line_no=line_no)
                result.failures.append(LoadFailure(ref=ref, error=str(bad)))
                continue
            rel_path = str(entry["path"])
            fmt = entry.get("format")
            meta = entry.get("metadata") or {}
            try:
                result.documents.append(
                    parse_document(
                        base / rel_path,
                        format_hint=fmt,
                        doc_id=Path(rel_path).as_posix(),
                        extra_metadata={str(k): str(v) for k, v in meta.items()},
                    )
                )
            except Exception as exc:
                result.failures.append(LoadFailure(ref=rel_path, error=str(exc)))
    return result


def load_corpus(root: str | Path) -> CorpusLoad:
    """Load a corpus from a directory tree or a JSON-lines manifest.

    Documents come back sorted by id; duplicate ids and per-file parse
    problems are recorded as failures. Raises EmptyCorpus when nothing
    parses, FileNotFoundError when root does not exist.
    """
    p = Path(root)
    if p.is_dir():
        result = _load_directory(p)
    elif p.is_file():
        result = _load_manifest(p)
    else:
        raise FileNotFoundError(str(p))

    unique: dict[str, SourceDocument] = {}
    for doc in result.documents:
        if doc.id in unique:
            result.failures.append(
                LoadFailure(ref=doc.id, error=f"duplicate document id '{doc.id}'")
            )
        else:
            unique[doc.id] = doc
    result.documents = [unique[k] for k in sorted(unique)]
    if not result.documents:
        raise EmptyCorpus(
            f"no parseable documents under '{p}' "
            f"({len(result.failures)} failure(s) recorded)"
        )
    return result
