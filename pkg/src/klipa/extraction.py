"""LLM triple extraction: prompts, tolerant JSON parsing, validation.

The model is asked for a JSON list of {head, relation, tail} objects.
Parsing is two-stage: a strict parse first, then a fixed sequence of
text-level repair passes (fence/prose stripping, quote normalization,
bare-key quoting, trailing-comma removal, truncation closing) followed by
another strict parse. Validation enforces the relation schema, infers
entity types from relation endpoints, canonicalizes entity keys, and
deduplicates within the batch; rejects carry machine-readable reasons.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import chunker
from .chunker import Chunk, SplitConfig
from .errors import GatewayError, InvalidConfig, Unrepairable
from .gateway import ChatMessage, ChatRequest, Gateway
from .ingest import SourceDocument

# --- canonical forms --------------------------------------------------------


def canonical_key(text: str) -> str:
    """Trim, collapse internal whitespace, casefold. Entity identity."""
    return " ".join(str(text).split()).casefold()


def display_form(text: str) -> str:
    """Trim and collapse whitespace but preserve the surface form."""
    return " ".join(str(text).split())


# --- schema -----------------------------------------------------------------


@dataclass(frozen=True)
class RelationType:
    name: str
    head_type: str
    tail_type: str
    synonyms: tuple[str, ...] = ()


DEFAULT_ENTITY_TYPES: tuple[str, ...] = (
    "Patent",
    "Inventor",
    "Company",
    "Technology",
    "Classification",
)

DEFAULT_RELATION_TYPES: tuple[RelationType, ...] = (
    RelationType("INVENTED_BY", "Patent", "Inventor", ("invented by", "inventor", "invented")),
    RelationType("OWNED_BY", "Patent", "Company", ("owned by", "assignee", "assigned to", "owner")),
    RelationType("REFERENCES", "Patent", "Patent", ("references", "cites", "refers to", "cited patent")),
    RelationType("CLASSIFIED_AS", "Patent", "Classification", ("classified as", "classification")),
    RelationType("USES", "Patent", "Technology", ("uses", "utilizes", "employs")),
)

DEFAULT_OUTPUT_SCHEMA = [
    {
        "head": "<entity name>",
        "head_type": "<entity type>",
        "relation": "<relation name>",
        "tail": "<entity name>",
        "tail_type": "<entity type>",
    }
]


@dataclass(frozen=True)
class SchemaConfig:
    """Extraction schema: the closed world of entity and relation types."""

    entity_types: tuple[str, ...] = DEFAULT_ENTITY_TYPES
    relation_types: tuple[RelationType, ...] = DEFAULT_RELATION_TYPES
    output_schema: object = field(default_factory=lambda: DEFAULT_OUTPUT_SCHEMA)

    def __post_init__(self) -> None:
        if not self.entity_types:
            raise InvalidConfig("entity_types must be non-empty")
        if len(set(self.entity_types)) != len(self.entity_types):
            raise InvalidConfig("entity_types must be unique")
        names = [r.name for r in self.relation_types]
        if len(set(names)) != len(names):
            raise InvalidConfig("relation names must be unique")
        for rel in self.relation_types:
            for endpoint in (rel.head_type, rel.tail_type):
                if endpoint not in self.entity_types:
                    raise InvalidConfig(
                        f"relation {rel.name} endpoint type '{endpoint}' "
                        "is not in entity_types"
                    )

    def fingerprint(self) -> str:
        canonical = json.dumps(
            {
                "entity_types": list(self.entity_types),
                "relation_types": [
                    {
                        "name": r.name,
                        "head_type": r.head_type,
                        "tail_type": r.tail_type,
                        "synonyms": list(r.synonyms),
                    }
                    for r in self.relation_types
                ],
                "output_schema": self.output_schema,
            },
            sort_keys=True,
            ensure_ascii=True,
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str | Path) -> "SchemaConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise InvalidConfig(f"schema file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfig("schema file must contain a JSON object")
        unknown = set(data) - {"entity_types", "relation_types", "output_schema"}
        if unknown:
            raise InvalidConfig(f"unknown schema keys: {sorted(unknown)}")
        entity_types = tuple(data.get("entity_types") or DEFAULT_ENTITY_TYPES)
        relations: list[RelationType] = []
        for i, entry in enumerate(data.get("relation_types") or []):
            try:
                relations.append(
                    RelationType(
                        name=str(entry["name"]),
                        head_type=str(entry["head_type"]),
                        tail_type=str(entry["tail_type"]),
                        synonyms=tuple(str(s) for s in entry.get("synonyms", ())),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise InvalidConfig(f"relation_types[{i}] is malformed: {exc}") from exc
        return cls(
            entity_types=entity_types,
            relation_types=tuple(relations) if relations else DEFAULT_RELATION_TYPES,
            output_schema=data.get("output_schema", DEFAULT_OUTPUT_SCHEMA),
        )


# --- prompt -----------------------------------------------------------------

PROMPT_TEXT_LIMIT = 500

PROMPT_TEMPLATE = """Extract entity-relation triples from the patent text below.

Source: {source}

Text:
{text}

Constraints:
- Entity types: {entity_types}
- Relations (head -> tail):
{relations}
- Output format: {output_format}

Respond ONLY with valid JSON."""


def build_prompt(chunk: Chunk, schema: SchemaConfig) -> str:
    """Render the extraction prompt; deterministic for equal inputs."""
    text = chunk.text
    if len(text) > PROMPT_TEXT_LIMIT:
        text = text[:PROMPT_TEXT_LIMIT] + "..."
    relations = "\n".join(
        f"  - {r.name}: {r.head_type} -> {r.tail_type}" for r in schema.relation_types
    )
    return PROMPT_TEMPLATE.format(
        source=chunk.metadata.get("source", chunk.doc_id),
        text=text,
        entity_types=", ".join(schema.entity_types),
        relations=relations,
        output_format=json.dumps(schema.output_schema, sort_keys=True),
    )


# --- stage 2: repair passes ---------------------------------------------------

_FENCE_CLOSED = re.compile(r"```(?:json)?\s*\n?(.*?)```", re.S | re.I)
_FENCE_OPEN = re.compile(r"```(?:json)?\s*\n?(.*)\Z", re.S | re.I)


def _strip_fences(text: str) -> str:
    m = _FENCE_CLOSED.search(text)
    if m:
        return m.group(1)
    m = _FENCE_OPEN.search(text)
    if m:
        return m.group(1)
    return text


def _bracket_span(text: str) -> str:
    """Cut to the outermost bracketed span; to EOS when truncated."""
    start = None
    for i, ch in enumerate(text):
        if ch in "[{":
            start = i
            break
    if start is None:
        return text.strip()
    depth = 0
    in_string: str | None = None
    i = start
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            if ch == "\\":
                i += 2
                continue
            if ch == in_string:
                in_string = None
        elif ch in "\"'":
            in_string = ch
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    return text[start:]


def _split_on_strings(text: str) -> list[tuple[str, bool]]:
    """Split into (segment, is_double_quoted_string) parts."""
    parts: list[tuple[str, bool]] = []
    i = 0
    n = len(text)
    plain_start = 0
    while i < n:
        if text[i] == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    j += 1
                    break
                j += 1
            j = min(j, n)
            if i > plain_start:
                parts.append((text[plain_start:i], False))
            parts.append((text[i:j], True))
            i = j
            plain_start = j
        else:
            i += 1
    if plain_start < n:
        parts.append((text[plain_start:], False))
    return parts


def _sub_outside_strings(text: str, fn) -> str:
    return "".join(seg if is_str else fn(seg) for seg, is_str in _split_on_strings(text))


def _single_to_double_quotes(text: str) -> str:
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            j = i + 1
            out.append('"')
            while j < n:
                c = text[j]
                if c == "\\" and j + 1 < n:
                    out.append(text[j : j + 2])
                    j += 2
                    continue
                out.append(c)
                j += 1
                if c == '"':
                    break
            i = j
        elif ch == "'":
            j = i + 1
            content: list[str] = []
            while j < n:
                c = text[j]
                if c == "\\" and j + 1 < n:
                    nxt = text[j + 1]
                    content.append("'" if nxt == "'" else text[j : j + 2])
                    j += 2
                    continue
                if c == "'":
                    j += 1
                    break
                content.append(c)
                j += 1
            inner = "".join(content).replace('"', '\\"')
            out.append(f'"{inner}"')
            i = j
        else:
            out.append(ch)
            i += 1
    return "".join(out)


_BARE_KEY = re.compile(r"([{,]\s*)([A-Za-z_][A-Za-z0-9_\-]*)(\s*:)")
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


def _quote_bare_keys(text: str) -> str:
    return _sub_outside_strings(text, lambda seg: _BARE_KEY.sub(r'\1"\2"\3', seg))


def _drop_trailing_commas(text: str) -> str:
    def fix(seg: str) -> str:
        while True:
            replaced = _TRAILING_COMMA.sub(r"\1", seg)
            if replaced == seg:
                return seg
            seg = replaced

    return _sub_outside_strings(text, fix)


def _close_truncated(text: str) -> str:
    """Close containers left open by mid-stream truncation, dropping any
    trailing incomplete element."""
    stack: list[str] = []
    cuts: list[tuple[int, tuple[str, ...]]] = []
    in_string = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            if ch == "\\":
                i += 2
                continue
            if ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch in "[{":
            stack.append(ch)
        elif ch in "]}":
            if stack:
                stack.pop()
            if not stack:
                return text[: i + 1]
            cuts.append((i + 1, tuple(stack)))
        i += 1
    if not stack and not in_string:
        return text
    if cuts:
        pos, open_stack = cuts[-1]
    else:
        first = next((k for k, c in enumerate(text) if c in "[{"), None)
        if first is None:
            return text
        pos, open_stack = first + 1, (text[first],)
    head = text[:pos].rstrip()
    if head.endswith(","):
        head = head[:-1]
    closers = {"[": "]", "{": "}"}
    return head + "".join(closers[c] for c in reversed(open_stack))


def repair_json_text(text: str) -> str:
    """Apply the repair passes in their fixed order.

    1. strip surrounding prose and code fences to the bracketed span
    2. convert single-quoted strings and keys to double-quoted
    3. quote bare object keys
    4. remove trailing commas
    5. close containers truncated mid-stream

    Strictly valid input passes through unchanged (the passes are
    fixpoints on well-formed JSON).
    """
    text = _bracket_span(_strip_fences(text))
    text = _single_to_double_quotes(text)
    text = _quote_bare_keys(text)
    text = _drop_trailing_commas(text)
    text = _close_truncated(text)
    return text


# --- parse ------------------------------------------------------------------


@dataclass(frozen=True)
class RawTriple:
    """Pre-validation carrier for whatever the model emitted."""

    head: str = ""
    relation: str = ""
    tail: str = ""
    head_type: str | None = None
    tail_type: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "RawTriple":
        def text_of(key: str) -> str:
            value = data.get(key)
            return "" if value is None else str(value)

        head_type = data.get("head_type")
        tail_type = data.get("tail_type")
        return cls(
            head=text_of("head"),
            relation=text_of("relation"),
            tail=text_of("tail"),
            head_type=None if head_type is None else str(head_type),
            tail_type=None if tail_type is None else str(tail_type),
        )


def parse_response(text: str) -> list[RawTriple]:
    """Two-stage parse of a model reply into RawTriples.

    Stage 1 is a strict JSON parse of the whole text; stage 2 applies the
    repair passes and parses strictly again. A single object is coerced
    to a one-element list. Raises Unrepairable (carrying the original
    text) when stage 2 also fails.
    """
    try:
        data = json.loads(text)
    except ValueError:
        repaired = repair_json_text(text)
        try:
            data = json.loads(repaired)
        except ValueError as exc:
            raise Unrepairable(
                f"model output is not JSON after repair: {exc}", original=text
            ) from exc
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        return []
    return [RawTriple.from_mapping(item) for item in data if isinstance(item, dict)]


# --- validate ------------------------------------------------------------------


@dataclass(frozen=True)
class EntityRef:
    """Canonical entity identity (key, type); display keeps the first-seen
    surface form and does not participate in equality."""

    key: str
    type: str
    display: str = field(compare=False, default="")


@dataclass(frozen=True)
class Provenance:
    doc_id: str
    seq_id: int


@dataclass(frozen=True)
class Triple:
    head: EntityRef
    relation: str
    tail: EntityRef
    provenance: Provenance

    def sort_key(self) -> tuple:
        return (
            self.provenance.doc_id,
            self.provenance.seq_id,
            self.head.type,
            self.head.key,
            self.relation,
            self.tail.type,
            self.tail.key,
        )


@dataclass(frozen=True)
class RejectReason:
    """Machine-readable rejection: code plus the offending detail."""

    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}({self.detail!r})"


@dataclass
class ValidationResult:
    valid: list[Triple] = field(default_factory=list)
    rejected: list[tuple[RawTriple, RejectReason]] = field(default_factory=list)


def _norm_relation(name: str) -> str:
    return " ".join(str(name).replace("_", " ").split()).casefold()


def _relation_lookup(schema: SchemaConfig) -> dict[str, RelationType]:
    lookup: dict[str, RelationType] = {}
    for rel in schema.relation_types:
        lookup.setdefault(_norm_relation(rel.name), rel)
        for synonym in rel.synonyms:
            lookup.setdefault(_norm_relation(synonym), rel)
    return lookup


def validate_triples(
    raws: list[RawTriple], schema: SchemaConfig, provenance: Provenance
) -> ValidationResult:
    """Check required keys, resolve relations (case-insensitive, synonyms
    included), infer or verify endpoint types, canonicalize entity keys,
    and deduplicate within the batch."""
    lookup = _relation_lookup(schema)
    type_by_fold = {t.casefold(): t for t in schema.entity_types}
    result = ValidationResult()
    seen: set[tuple[str, str, str, str, str]] = set()
    for raw in raws:
        missing = next(
            (
                name
                for name in ("head", "relation", "tail")
                if not getattr(raw, name).strip()
            ),
            None,
        )
        if missing is not None:
            result.rejected.append((raw, RejectReason("MissingKey", missing)))
            continue
        relation = lookup.get(_norm_relation(raw.relation))
        if relation is None:
            result.rejected.append(
                (raw, RejectReason("UnknownRelation", raw.relation.strip()))
            )
            continue
        endpoint_types: dict[str, str] = {}
        mismatch: RejectReason | None = None
        for end, declared, expected in (
            ("head", raw.head_type, relation.head_type),
            ("tail", raw.tail_type, relation.tail_type),
        ):
            if declared is None or not declared.strip():
                endpoint_types[end] = expected
                continue
            resolved = type_by_fold.get(declared.strip().casefold())
            if resolved != expected:
                mismatch = RejectReason(
                    "TypeMismatch", f"{end}={declared.strip()}, expected {expected}"
                )
                break
            endpoint_types[end] = resolved
        if mismatch is not None:
            result.rejected.append((raw, mismatch))
            continue
        head = EntityRef(
            key=canonical_key(raw.head),
            type=endpoint_types["head"],
            display=display_form(raw.head),
        )
        tail = EntityRef(
            key=canonical_key(raw.tail),
            type=endpoint_types["tail"],
            display=display_form(raw.tail),
        )
        dedupe_key = (head.key, head.type, relation.name, tail.key, tail.type)
        if dedupe_key in seen:
            continue
        seen.add(dedupe_key)
        result.valid.append(
            Triple(head=head, relation=relation.name, tail=tail, provenance=provenance)
        )
    return result


def entities_of(triples: list[Triple]) -> set[EntityRef]:
    """The entity set induced by a triple list (union of endpoints)."""
    out: set[EntityRef] = set()
    for t in triples:
        out.add(t.head)
        out.add(t.tail)
    return out


# --- per-chunk and corpus extraction -----------------------------------------


@dataclass
class ChunkExtraction:
    doc_id: str
    seq_id: int
    triples: list[Triple] = field(default_factory=list)
    rejected: list[tuple[RawTriple, RejectReason]] = field(default_factory=list)
    failure: str | None = None
    elapsed_s: float = 0.0
    cached: bool = False


class ExtractionCache:
    """Content-addressed reply cache: one JSON line per (chunk text,
    schema fingerprint, model name) key. Unreadable entries are skipped
    with a warning and recomputed."""

    FILENAME = "extraction-cache.jsonl"

    def __init__(self, directory: str | Path) -> None:
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._path = self._dir / self.FILENAME
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self._path.is_file():
            self._load()

    def _load(self) -> None:
        try:
            lines = self._path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            warnings.warn(f"extraction cache unreadable, recomputing: {exc}")
            return
        for line_no, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                key = entry["key"]
                reply = entry["reply"]
                if not isinstance(key, str) or not isinstance(reply, str):
                    raise ValueError("key and reply must be strings")
            except (ValueError, KeyError, TypeError) as exc:
                warnings.warn(
                    f"corrupt cache entry at line {line_no}, recomputing: {exc}"
                )
                continue
            self._entries[key] = reply

    @staticmethod
    def key_for(chunk_text: str, schema_fingerprint: str, model_name: str) -> str:
        material = f"{model_name}\n{schema_fingerprint}\n{chunk_text}"
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, reply: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = reply
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "reply": reply}) + "\n")


def extract_chunk(
    chunk: Chunk,
    schema: SchemaConfig,
    gateway: Gateway,
    cache: ExtractionCache | None = None,
) -> ChunkExtraction:
    """Prompt, parse, validate one chunk. Failures are recorded on the
    result, never raised, so corpus runs degrade per-chunk."""
    outcome = ChunkExtraction(doc_id=chunk.doc_id, seq_id=chunk.seq_id)
    started = time.perf_counter()
    key = None
    reply_text: str | None = None
    if cache is not None:
        key = cache.key_for(chunk.text, schema.fingerprint(), gateway.model_name)
        reply_text = cache.get(key)
        outcome.cached = reply_text is not None
    try:
        if reply_text is None:
            prompt = build_prompt(chunk, schema)
            reply = gateway.chat(
                ChatRequest(messages=(ChatMessage(role="user", content=prompt),))
            )
            reply_text = reply.text
            if cache is not None and key is not None:
                cache.put(key, reply_text)
        raws = parse_response(reply_text)
    except GatewayError as exc:
        outcome.failure = f"gateway: {exc}"
        outcome.elapsed_s = time.perf_counter() - started
        return outcome
    except Unrepairable as exc:
        outcome.failure = f"unrepairable model output: {exc}"
        outcome.elapsed_s = time.perf_counter() - started
        return outcome
    validated = validate_triples(
        raws, schema, Provenance(doc_id=chunk.doc_id, seq_id=chunk.seq_id)
    )
    outcome.triples = validated.valid
    outcome.rejected = validated.rejected
    outcome.elapsed_s = time.perf_counter() - started
    return outcome


@dataclass
class DocReport:
    doc_id: str
    chunks: int = 0
    triples: int = 0
    rejected: int = 0
    failures: list[str] = field(default_factory=list)
    time_s: float = 0.0


@dataclass
class ExtractionReport:
    model: str
    schema_fingerprint: str
    per_doc: list[DocReport] = field(default_factory=list)
    cache_hits: int = 0
    cache_misses: int = 0
    total_time_s: float = 0.0

    def to_json_obj(self) -> dict:
        return {
            "model": self.model,
            "schema_fingerprint": self.schema_fingerprint,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "total_time_s": self.total_time_s,
            "per_doc": [
                {
                    "doc_id": d.doc_id,
                    "chunks": d.chunks,
                    "triples": d.triples,
                    "rejected": d.rejected,
                    "failures": list(d.failures),
                    "time_s": d.time_s,
                }
                for d in self.per_doc
            ],
        }

    @classmethod
    def from_json_obj(cls, data: dict) -> "ExtractionReport":
        report = cls(
            model=data.get("model", ""),
            schema_fingerprint=data.get("schema_fingerprint", ""),
            cache_hits=int(data.get("cache_hits", 0)),
            cache_misses=int(data.get("cache_misses", 0)),
            total_time_s=float(data.get("total_time_s", 0.0)),
        )
        for d in data.get("per_doc", []):
            report.per_doc.append(
                DocReport(
                    doc_id=d["doc_id"],
                    chunks=int(d.get("chunks", 0)),
                    triples=int(d.get("triples", 0)),
                    rejected=int(d.get("rejected", 0)),
                    failures=[str(f) for f in d.get("failures", [])],
                    time_s=float(d.get("time_s", 0.0)),
                )
            )
        return report


@dataclass
class ExtractionResult:
    triples: list[Triple]
    report: ExtractionReport


def extract_corpus(
    docs: list[SourceDocument],
    schema: SchemaConfig,
    gateway: Gateway,
    cache_dir: str | Path | None = None,
    split_config: SplitConfig | None = None,
    parallelism: int = 8,
) -> ExtractionResult:
    """Extract triples for a whole corpus with bounded parallelism.

    Chunk replies are cached content-addressed when cache_dir is given;
    warm-cache reruns make zero gateway calls. Results merge in
    (doc_id, seq_id) order and the final triple list is sorted, so output
    does not depend on the parallelism setting.
    """
    split_config = split_config or SplitConfig()
    cache = ExtractionCache(cache_dir) if cache_dir is not None else None
    doc_chunks: list[tuple[SourceDocument, list[Chunk]]] = [
        (doc, chunker.split(doc, split_config)) for doc in docs
    ]
    all_chunks = [c for _, chunks in doc_chunks for c in chunks]

    started = time.perf_counter()
    results: dict[tuple[str, int], ChunkExtraction] = {}
    if all_chunks:
        workers = max(1, min(parallelism, len(all_chunks)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for outcome in pool.map(
                lambda c: extract_chunk(c, schema, gateway, cache), all_chunks
            ):
                results[(outcome.doc_id, outcome.seq_id)] = outcome

    report = ExtractionReport(
        model=gateway.model_name, schema_fingerprint=schema.fingerprint()
    )
    triples: list[Triple] = []
    for doc, chunks in doc_chunks:
        row = DocReport(doc_id=doc.id, chunks=len(chunks))
        for chunk in chunks:
            outcome = results[(chunk.doc_id, chunk.seq_id)]
            row.triples += len(outcome.triples)
            row.rejected += len(outcome.rejected)
            row.time_s += outcome.elapsed_s
            if outcome.failure is not None:
                row.failures.append(f"{chunk.doc_id}#{chunk.seq_id}: {outcome.failure}")
            if outcome.cached:
                report.cache_hits += 1
            else:
                report.cache_misses += 1
            triples.extend(outcome.triples)
        report.per_doc.append(row)
    report.total_time_s = time.perf_counter() - started
    triples.sort(key=Triple.sort_key)
    return ExtractionResult(triples=triples, report=report)


# --- triple dump --------------------------------------------------------------


def triple_to_json_obj(triple: Triple) -> dict:
    return {
        "head": {
            "key": triple.head.key,
            "type": triple.head.type,
            "display": triple.head.display,
        },
        "relation": triple.relation,
        "tail": {
            "key": triple.tail.key,
            "type": triple.tail.type,
            "display": triple.tail.display,
        },
        "provenance": {
            "doc_id": triple.provenance.doc_id,
            "seq_id": triple.provenance.seq_id,
        },
    }


def triple_from_json_obj(data: dict) -> Triple:
    return Triple(
        head=EntityRef(
            key=data["head"]["key"],
            type=data["head"]["type"],
            display=data["head"].get("display", data["head"]["key"]),
        ),
        relation=data["relation"],
        tail=EntityRef(
            key=data["tail"]["key"],
            type=data["tail"]["type"],
            display=data["tail"].get("display", data["tail"]["key"]),
        ),
        provenance=Provenance(
            doc_id=data["provenance"]["doc_id"],
            seq_id=int(data["provenance"]["seq_id"]),
        ),
    )


def write_triples(triples: list[Triple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(json.dumps(triple_to_json_obj(t), sort_keys=True) + "\n")


def read_triples(path: str | Path) -> list[Triple]:
    out: list[Triple] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(triple_from_json_obj(json.loads(line)))
    return out
