"""Command-line driver.

Subcommands mirror the pipeline stages: build-kg, index, query, chat,
serve, eval, plus snapshot export/import. Exit codes are stable for
scripting: 0 success, 2 configuration problem, 3 empty or missing
inputs, 4 gateway unreachable, 1 anything else.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
from filelock import FileLock
from filelock import Timeout as LockTimeout

from . import __version__
from .agent import ChatSession, answer_to_dict
from .config import EngineConfig, load_config
from .engine import (
    answer_query,
    load_context,
    run_build,
    run_eval,
    run_index,
)
from .errors import (
    AgentError,
    BindFailure,
    ConfigError,
    EmptyCorpus,
    EmptyIndex,
    FixtureParse,
    GatewayError,
    IndexMissing,
    InvalidConfig,
    KlipaError,
    MissingArtifact,
)
from .graphstore import export_snapshot, import_snapshot
from .metrics import render_report

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_GATEWAY = 4

log = logging.getLogger("klipa")


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, (ConfigError, InvalidConfig, FixtureParse)):
        sys.exit(EXIT_CONFIG)
    if isinstance(
        exc, (EmptyCorpus, MissingArtifact, EmptyIndex, IndexMissing, FileNotFoundError)
    ):
        sys.exit(EXIT_MISSING)
    if isinstance(exc, (GatewayError, AgentError)):
        sys.exit(EXIT_GATEWAY)
    sys.exit(1)


def _command(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (KlipaError, FileNotFoundError) as exc:
            _fail(exc)

    return wrapper


def _exclusive(cfg: EngineConfig) -> FileLock:
    cfg.cache_dir.mkdir(parents=True, exist_ok=True)
    return FileLock(str(cfg.build_lock), timeout=10)


@click.group()
@click.version_option(__version__, prog_name="klipa")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Engine config file (JSON). Defaults apply when omitted.",
)
@click.option(
    "--mock-fixture",
    type=click.Path(path_type=Path),
    default=None,
    help="Use the scripted mock gateway with this fixture file.",
)
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def main(ctx: click.Context, config_path: Path | None, mock_fixture: Path | None, verbose: bool) -> None:
    """Knowledge-graph construction, hybrid retrieval, and agentic QA."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(config_path)
        if mock_fixture is not None:
            cfg.use_mock(mock_fixture)
    except (KlipaError, FileNotFoundError) as exc:
        _fail(exc)
        return
    ctx.obj = cfg


def _apply_overrides(
    cfg: EngineConfig,
    corpus: Path | None = None,
    schema: Path | None = None,
    cache_dir: Path | None = None,
    parallelism: int | None = None,
) -> None:
    if corpus is not None:
        cfg.corpus = corpus.resolve()
    if schema is not None:
        cfg.schema = schema.resolve()
    if cache_dir is not None:
        cfg.cache_dir = cache_dir.resolve()
    if parallelism is not None:
        cfg.parallelism = parallelism


def _echo_failures(failures: list[str]) -> None:
    for failure in failures:
        click.echo(f"failure: {failure}", err=True)


@main.command("build-kg")
@click.option("--corpus", type=click.Path(path_type=Path), default=None)
@click.option("--schema", type=click.Path(path_type=Path), default=None)
@click.option("--cache-dir", type=click.Path(path_type=Path), default=None)
@click.option("--parallelism", type=int, default=None)
@click.pass_obj
@_command
def build_kg(
    cfg: EngineConfig,
    corpus: Path | None,
    schema: Path | None,
    cache_dir: Path | None,
    parallelism: int | None,
) -> None:
    """Extract triples from the corpus and write the graph snapshot."""
    _apply_overrides(cfg, corpus, schema, cache_dir, parallelism)
    try:
        with _exclusive(cfg):
            result = run_build(cfg)
    except LockTimeout:
        click.echo("error: another build/index run holds the lock", err=True)
        sys.exit(1)
    _echo_failures(result.failures)
    click.echo(
        f"built {result.node_count} nodes, {result.edge_count} edges "
        f"from {result.triple_count} triples -> {result.snapshot_path}"
    )
    if result.failures:
        click.echo(f"{len(result.failures)} failure(s) recorded", err=True)


@main.command()
@click.option("--corpus", type=click.Path(path_type=Path), default=None)
@click.option(
    "--from-corpus",
    is_flag=True,
    help="Run build-kg first instead of requiring an existing snapshot.",
)
@click.pass_obj
@_command
def index(cfg: EngineConfig, corpus: Path | None, from_corpus: bool) -> None:
    """Write the chunk- and document-level retrieval indexes."""
    _apply_overrides(cfg, corpus=corpus)
    try:
        with _exclusive(cfg):
            if from_corpus:
                run_build(cfg)
            elif not cfg.snapshot.is_file():
                raise MissingArtifact(
                    f"graph snapshot not found: {cfg.snapshot} "
                    "(run 'klipa build-kg' or pass --from-corpus)"
                )
            result = run_index(cfg)
    except LockTimeout:
        click.echo("error: another build/index run holds the lock", err=True)
        sys.exit(1)
    _echo_failures(result.failures)
    click.echo(
        f"indexed {result.chunk_count} chunks -> {result.chunk_index_path}"
    )
    click.echo(
        f"indexed {result.document_count} documents -> {result.document_index_path}"
    )


def _echo_trace(answer_dict: dict) -> None:
    for i, step in enumerate(answer_dict["steps"], 1):
        click.echo(f"[step {i}] thought: {step['thought']}", err=True)
        if step["action"]:
            click.echo(
                f"[step {i}] action: {step['action']['tool']} "
                f"<- {step['action']['input']}",
                err=True,
            )
        if step["observation"] is not None:
            click.echo(f"[step {i}] observation: {step['observation']}", err=True)
    for ev in answer_dict["evidence"]:
        click.echo(f"[evidence] {ev['kind']} {ev['ref']}: {ev['snippet']}", err=True)
    if answer_dict["degraded"]:
        click.echo("[degraded] answered without retrieved evidence", err=True)


@main.command()
@click.argument("question")
@click.option("--json", "as_json", is_flag=True, help="Print the full answer as JSON.")
@click.pass_obj
@_command
def query(cfg: EngineConfig, question: str, as_json: bool) -> None:
    """Answer one question against the built artifacts."""
    context = load_context(cfg)
    answer = answer_to_dict(answer_query(context, question))
    if as_json:
        click.echo(json.dumps(answer, sort_keys=True))
        return
    click.echo(answer["text"])
    _echo_trace(answer)


@main.command()
@click.pass_obj
@_command
def chat(cfg: EngineConfig) -> None:
    """Interactive session; history persists until EOF (Ctrl-D)."""
    context = load_context(cfg)
    session = ChatSession()
    click.echo("chat session started; Ctrl-D to exit", err=True)
    while True:
        try:
            line = input("you> ")
        except EOFError:
            click.echo("", err=True)
            break
        if not line.strip():
            continue
        answer = answer_to_dict(answer_query(context, line.strip(), session))
        click.echo(answer["text"])
        _echo_trace(answer)


@main.command()
@click.option("--host", default=None, help="Override the configured bind host.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.pass_obj
@_command
def serve(cfg: EngineConfig, host: str | None, port: int | None) -> None:
    """Serve the HTTP API (and the UI, when built) until interrupted."""
    from .service import serve as run_service

    if host is not None:
        cfg.service.host = host
    if port is not None:
        cfg.service.port = port
    try:
        run_service(cfg)
    except BindFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("eval")
@click.option("--gold", type=click.Path(path_type=Path), default=None)
@click.option("--graph", type=click.Path(path_type=Path), default=None)
@click.option("--triples", type=click.Path(path_type=Path), default=None)
@click.option("--report", type=click.Path(path_type=Path), default=None)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["table", "json"]),
    default="table",
    show_default=True,
)
@click.option("--label", default=None, help="Row label; defaults to the gold file stem.")
@click.pass_obj
@_command
def eval_cmd(
    cfg: EngineConfig,
    gold: Path | None,
    graph: Path | None,
    triples: Path | None,
    report: Path | None,
    fmt: str,
    label: str | None,
) -> None:
    """Score the built graph against gold annotations."""
    result = run_eval(
        cfg,
        gold_path=gold.resolve() if gold else None,
        graph_path=graph.resolve() if graph else None,
        triples_path=triples.resolve() if triples else None,
        report_path=report.resolve() if report else None,
        label=label,
    )
    click.echo(render_report(result, fmt))


@main.command("export-graph")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
@_command
def export_graph(cfg: EngineConfig, out: Path) -> None:
    """Copy the built snapshot to OUT in canonical JSON-lines form."""
    if not cfg.snapshot.is_file():
        raise MissingArtifact(
            f"graph snapshot not found: {cfg.snapshot} (run 'klipa build-kg' first)"
        )
    snapshot = import_snapshot(cfg.snapshot)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_snapshot(snapshot, out)
    click.echo(f"exported {len(snapshot.nodes)} nodes, {len(snapshot.edges)} edges -> {out}")


@main.command("import-graph")
@click.argument("source", type=click.Path(path_type=Path))
@click.pass_obj
@_command
def import_graph(cfg: EngineConfig, source: Path) -> None:
    """Validate SOURCE and install it as the engine's graph snapshot."""
    snapshot = import_snapshot(source)
    cfg.snapshot.parent.mkdir(parents=True, exist_ok=True)
    export_snapshot(snapshot, cfg.snapshot)
    click.echo(
        f"imported {len(snapshot.nodes)} nodes, {len(snapshot.edges)} edges "
        f"-> {cfg.snapshot}"
    )


if __name__ == "__main__":
    main()
