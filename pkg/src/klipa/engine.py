"""Pipeline orchestration shared by the CLI and the HTTP service.

Each run_* function is one pipeline stage over an EngineConfig: build
loads the corpus and writes the graph snapshot plus triple/report
artifacts, index writes the two retrieval indexes, eval scores a built
graph against gold annotations. load_context opens the artifacts
read-only and hands back everything the agent needs to answer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import chunker
from .agent import AgentAnswer, AgentContext, ChatSession, PromptSet, run
from .config import EngineConfig
from .errors import ConfigError, MissingArtifact
from .extraction import (
    ExtractionReport,
    SchemaConfig,
    extract_corpus,
    read_triples,
    write_triples,
)
from .gateway import Gateway, HttpGateway, make_mock_backend
from .graphstore import GraphStore, export_snapshot, import_snapshot
from .ingest import load_corpus
from .metrics import EvalReport, evaluate, load_gold, triples_by_doc
from .retrieval import CHUNK_LEVEL, DOCUMENT_LEVEL, Index, IndexSet, build_index


def build_gateway(config: EngineConfig) -> Gateway:
    if config.gateway_mode == "mock":
        if config.mock_fixture is None:
            raise ConfigError("gateway mode is 'mock' but no fixture is set")
        if not config.mock_fixture.is_file():
            raise ConfigError(f"mock fixture not found: {config.mock_fixture}")
        return make_mock_backend(config.mock_fixture)
    return HttpGateway(config.gateway)


def load_schema(config: EngineConfig) -> SchemaConfig:
    if config.schema is None:
        return SchemaConfig()
    if not config.schema.is_file():
        raise ConfigError(f"schema file not found: {config.schema}")
    return SchemaConfig.from_file(config.schema)


def artifact_fingerprint(path: Path) -> str | None:
    """Content hash for /api/health; changes iff the file bytes change."""
    if not path.is_file():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


@dataclass
class BuildResult:
    snapshot_path: Path
    triples_path: Path
    report_path: Path
    report: ExtractionReport
    node_count: int
    edge_count: int
    triple_count: int
    failures: list[str] = field(default_factory=list)


def run_build(config: EngineConfig, gateway: Gateway | None = None) -> BuildResult:
    """Corpus -> chunks -> triples -> merged graph, written to disk.

    Per-document problems degrade into the failure list; only empty or
    missing inputs and config errors abort.
    """
    corpus = load_corpus(config.corpus)
    schema = load_schema(config)
    gateway = gateway or build_gateway(config)
    config.cache_dir.mkdir(parents=True, exist_ok=True)

    result = extract_corpus(
        corpus.documents,
        schema,
        gateway,
        cache_dir=config.cache_dir,
        split_config=config.split,
        parallelism=config.parallelism,
    )
    failures = [f"{f.ref}: {f.error}" for f in corpus.failures]

    store = GraphStore(schema_fingerprint=schema.fingerprint())
    kept = []
    for triple in result.triples:
        if (triple.head.key, triple.head.type) == (triple.tail.key, triple.tail.type):
            prov = triple.provenance
            failures.append(
                f"{prov.doc_id}#{prov.seq_id}: self-loop skipped "
                f"({triple.head.key} -{triple.relation}-> {triple.tail.key})"
            )
            continue
        kept.append(triple)
    with store.batch_writer() as writer:
        for triple in kept:
            writer.add(triple)

    for path in (config.snapshot, config.triples, config.report):
        path.parent.mkdir(parents=True, exist_ok=True)
    export_snapshot(store.snapshot(), config.snapshot)
    write_triples(kept, config.triples)
    config.report.write_text(
        json.dumps(result.report.to_json_obj(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    for doc in result.report.per_doc:
        failures.extend(doc.failures)
    return BuildResult(
        snapshot_path=config.snapshot,
        triples_path=config.triples,
        report_path=config.report,
        report=result.report,
        node_count=store.node_count(),
        edge_count=store.edge_count(),
        triple_count=len(kept),
        failures=failures,
    )


@dataclass
class IndexResult:
    chunk_index_path: Path
    document_index_path: Path
    chunk_count: int
    document_count: int
    failures: list[str] = field(default_factory=list)


def run_index(config: EngineConfig, gateway: Gateway | None = None) -> IndexResult:
    """Embed the corpus into the chunk- and document-level index files."""
    corpus = load_corpus(config.corpus)
    gateway = gateway or build_gateway(config)
    chunks = [
        chunk for doc in corpus.documents for chunk in chunker.split(doc, config.split)
    ]
    chunk_index, chunk_failures = build_index(chunks, CHUNK_LEVEL, gateway)
    doc_index, doc_failures = build_index(chunks, DOCUMENT_LEVEL, gateway)
    config.index_dir.mkdir(parents=True, exist_ok=True)
    chunk_index.save(config.chunk_index)
    doc_index.save(config.document_index)
    return IndexResult(
        chunk_index_path=config.chunk_index,
        document_index_path=config.document_index,
        chunk_count=len(chunk_index.items),
        document_count=len(doc_index.items),
        failures=[f"{f.ref}: {f.error}" for f in corpus.failures]
        + chunk_failures
        + doc_failures,
    )


def _require(path: Path, what: str, remedy: str) -> None:
    if not path.is_file():
        raise MissingArtifact(f"{what} not found: {path} (run '{remedy}' first)")


def load_context(config: EngineConfig, gateway: Gateway | None = None) -> AgentContext:
    """Open the built artifacts read-only and assemble the agent context."""
    _require(config.snapshot, "graph snapshot", "klipa build-kg")
    _require(config.chunk_index, "chunk index", "klipa index")
    _require(config.document_index, "document index", "klipa index")
    store = GraphStore.from_snapshot(import_snapshot(config.snapshot))
    indexes = IndexSet(
        chunk=Index.load(config.chunk_index),
        document=Index.load(config.document_index),
    )
    prompts = PromptSet.load(config.prompts_dir)
    return AgentContext(
        graph=store,
        indexes=indexes,
        gateway=gateway or build_gateway(config),
        retrieval=config.retrieval,
        agent=config.agent,
        prompts=prompts,
    )


def answer_query(
    context: AgentContext, question: str, session: ChatSession | None = None
) -> AgentAnswer:
    """One-shot answer; an ephemeral session is created when none is given."""
    return run(question, session if session is not None else ChatSession(), context)


def run_eval(
    config: EngineConfig,
    gold_path: Path | None = None,
    graph_path: Path | None = None,
    triples_path: Path | None = None,
    report_path: Path | None = None,
    label: str | None = None,
) -> EvalReport:
    """Score a built graph against gold annotations."""
    gold_path = gold_path or config.gold
    if gold_path is None:
        raise ConfigError("no gold file configured; pass --gold or set 'gold'")
    graph_path = graph_path or config.snapshot
    triples_path = triples_path or config.triples
    report_path = report_path or config.report
    _require(gold_path, "gold file", "klipa eval --gold <file>")
    _require(graph_path, "graph snapshot", "klipa build-kg")
    _require(triples_path, "triple dump", "klipa build-kg")
    _require(report_path, "extraction report", "klipa build-kg")

    gold = load_gold(gold_path)
    triples = read_triples(triples_path)
    snapshot = import_snapshot(graph_path)
    report = ExtractionReport.from_json_obj(
        json.loads(report_path.read_text(encoding="utf-8"))
    )
    extracted = triples_by_doc(triples, [record.doc_id for record in gold])
    return evaluate(
        gold, extracted, snapshot, report, label=label or gold_path.stem
    )
