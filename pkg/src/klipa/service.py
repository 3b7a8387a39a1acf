"""HTTP service exposing the pipeline and the agent.

All state is in memory: sessions live in a dict for the process
lifetime, with an optional append-only JSON-lines transcript log.
Every failure surfaces as one error shape, {code, message, status},
so clients never branch on two formats.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import replace
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import __version__
from .agent import AgentContext, ChatSession, answer_to_dict
from .config import EngineConfig
from .engine import answer_query, artifact_fingerprint, build_gateway, load_context, run_eval
from .errors import (
    AgentError,
    BindFailure,
    ConfigError,
    EmptyReport,
    GatewayError,
    IndexMissing,
    InvalidConfig,
    KlipaError,
    MissingArtifact,
    MissingExtraction,
    SessionBusy,
    UnknownNode,
    UnknownOrg,
)
from .extraction import canonical_key
from .gateway import Gateway
from .graphstore import DIRECTIONS, EntityNode, GraphStore, NodeRef, RelationEdge

class SessionNotFound(KlipaError):
    """Requested session id has no live session."""


_ERROR_MAP: tuple[tuple[type[KlipaError], int, str], ...] = (
    (SessionNotFound, 404, "session_not_found"),
    (SessionBusy, 409, "session_busy"),
    (UnknownNode, 404, "entity_not_found"),
    (MissingArtifact, 404, "artifact_missing"),
    (IndexMissing, 404, "artifact_missing"),
    (UnknownOrg, 422, "unknown_org"),
    (MissingExtraction, 422, "missing_extraction"),
    (EmptyReport, 422, "empty_report"),
    (AgentError, 502, "agent_error"),
    (GatewayError, 502, "gateway_error"),
    (InvalidConfig, 400, "invalid_request"),
    (ConfigError, 400, "invalid_request"),
)


def _api_error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "status": status},
    )


class MessageBody(BaseModel):
    text: str = Field(min_length=1)


class SubgraphBody(BaseModel):
    keys: list[str]


def _node_obj(node: EntityNode) -> dict:
    return {
        "key": node.key,
        "type": node.type,
        "display_name": node.display_name,
        "properties": dict(node.properties),
    }


def _edge_obj(edge: RelationEdge) -> dict:
    return {
        "src": {"key": edge.src.key, "type": edge.src.type},
        "dst": {"key": edge.dst.key, "type": edge.dst.type},
        "rel_type": edge.rel_type,
        "provenance": [
            {"doc_id": p.doc_id, "seq_id": p.seq_id} for p in edge.provenance
        ],
    }


def _resolve_entity(graph: GraphStore, raw: str) -> NodeRef:
    candidates = graph.resolve_key(canonical_key(raw))
    if not candidates:
        raise UnknownNode(f"entity '{raw}' is not in the graph")
    return candidates[0]


class _SessionLog:
    def __init__(self, path: Path | None) -> None:
        self._path = path
        self._lock = threading.Lock()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, session_id: str, query: str, answer: dict) -> None:
        if self._path is None:
            return
        line = json.dumps(
            {
                "ts": time.time(),
                "session_id": session_id,
                "query": query,
                "answer": answer,
            },
            sort_keys=True,
        )
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def create_app(
    config: EngineConfig,
    gateway: Gateway | None = None,
    context: AgentContext | None = None,
) -> FastAPI:
    """Build the service around built artifacts (or an injected context)."""
    if context is None:
        context = load_context(config, gateway)
    app = FastAPI(title="klipa", version=__version__)
    sessions: dict[str, ChatSession] = {}
    sessions_lock = threading.Lock()
    log = _SessionLog(config.service.session_log)

    @app.exception_handler(KlipaError)
    def _on_klipa_error(request: Request, exc: KlipaError) -> JSONResponse:
        for klass, status, code in _ERROR_MAP:
            if isinstance(exc, klass):
                return _api_error(status, code, str(exc))
        return _api_error(500, "internal_error", str(exc))

    @app.exception_handler(RequestValidationError)
    def _on_validation_error(
        request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        return _api_error(422, "invalid_request", str(exc.errors()))

    @app.exception_handler(StarletteHTTPException)
    def _on_http_error(
        request: Request, exc: StarletteHTTPException
    ) -> JSONResponse:
        return _api_error(exc.status_code, "http_error", str(exc.detail))

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "versions": {"klipa": __version__},
            "model": context.gateway.model_name,
            "fingerprints": {
                "snapshot": artifact_fingerprint(config.snapshot),
                "chunk_index": artifact_fingerprint(config.chunk_index),
                "document_index": artifact_fingerprint(config.document_index),
            },
        }

    @app.post("/api/sessions")
    def create_session() -> dict:
        session = ChatSession()
        with sessions_lock:
            sessions[session.id] = session
        return {"session_id": session.id}

    def _get_session(session_id: str) -> ChatSession:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session '{session_id}'")
        return session

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = _get_session(session_id)
        return {
            "session_id": session.id,
            "created_at": session.created_at,
            "turns": [
                {"user_text": turn.user_text, "answer": answer_to_dict(turn.answer)}
                for turn in session.history
            ],
        }

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody) -> dict:
        session = _get_session(session_id)
        answer = answer_to_dict(answer_query(context, body.text, session))
        log.append(session.id, body.text, answer)
        return answer

    @app.post("/api/query")
    def query(body: MessageBody) -> dict:
        session = ChatSession()  # ephemeral: never stored, one turn only
        answer = answer_to_dict(answer_query(context, body.text, session))
        log.append(session.id, body.text, answer)
        return answer

    @app.get("/api/graph/neighborhood")
    def neighborhood(entity: str, direction: str = "both") -> dict:
        if direction not in DIRECTIONS:
            raise InvalidConfig(f"direction must be one of {DIRECTIONS}")
        ref = _resolve_entity(context.graph, entity)
        neighbors = sorted(
            context.graph.neighborhood(ref, direction), key=NodeRef.sort_key
        )
        edges = context.graph.edges_of(ref, direction)
        return {
            "entity": _node_obj(context.graph.get_node(ref)),
            "nodes": [_node_obj(context.graph.get_node(n)) for n in neighbors],
            "edges": [_edge_obj(e) for e in edges],
        }

    @app.post("/api/graph/subgraph")
    def subgraph(body: SubgraphBody) -> dict:
        refs: list[NodeRef] = []
        missing: list[str] = []
        for raw in body.keys:
            candidates = context.graph.resolve_key(canonical_key(raw))
            if candidates:
                refs.append(candidates[0])
            else:
                missing.append(raw)
        snap = context.graph.induced_subgraph(set(refs))
        return {
            "nodes": [_node_obj(n) for n in snap.nodes],
            "edges": [_edge_obj(e) for e in snap.edges],
            "missing": sorted(missing),
        }

    @app.get("/api/search")
    def search(q: str, level: str = "chunk", k: int | None = None) -> dict:
        cfg = context.retrieval
        if k is not None:
            if k < 1:
                raise InvalidConfig("k must be >= 1")
            cfg = replace(cfg, top_k=k)
        index = context.indexes.index_for(level)
        hits = context.indexes.retrieve(level, q, context.gateway, cfg)
        out = []
        for hit in hits:
            item = index.get(hit.id)
            out.append(
                {
                    "id": hit.id,
                    "score": hit.score,
                    "source": hit.source,
                    "level": hit.level,
                    "snippet": item.text[:400] if item else "",
                    "metadata": dict(item.metadata) if item else {},
                }
            )
        return {"hits": out}

    @app.get("/api/eval")
    def eval_endpoint(gold: str | None = None) -> dict:
        gold_path = Path(gold) if gold else None
        report = run_eval(config, gold_path=gold_path)
        return report.to_json_obj()

    static_dir = config.service.static_dir
    if static_dir is not None and static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(config: EngineConfig, gateway: Gateway | None = None) -> None:
    """Run the service until interrupted."""
    app = create_app(config, gateway)
    host, port = config.service.host, config.service.port
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    uvicorn.run(app, host=host, port=port, log_level="info")
