"""HTTP service: health, sessions, graph and search endpoints, error shapes."""

import json

import pytest
from fastapi.testclient import TestClient

import fixture_corpus
from conftest import build_env
from klipa import __version__
from klipa.config import load_config
from klipa.service import create_app


@pytest.fixture(scope="module")
def service_env(tmp_path_factory: pytest.TempPathFactory):
    root = tmp_path_factory.mktemp("service-env")
    config_path = build_env(root)
    return root, load_config(config_path, env={})


@pytest.fixture(scope="module")
def client(service_env) -> TestClient:
    _, config = service_env
    return TestClient(create_app(config))


def assert_error_shape(response, status: int, code: str) -> dict:
    assert response.status_code == status
    body = response.json()
    assert body["code"] == code
    assert body["status"] == status
    assert isinstance(body["message"], str) and body["message"]
    assert set(body) == {"code", "message", "status"}
    return body


# --- health ---------------------------------------------------------------------


def test_health_reports_fingerprints(client, service_env):
    root, _ = service_env
    body = client.get("/api/health").json()
    assert body["status"] == "ok"
    assert body["versions"]["klipa"] == __version__
    assert body["model"].startswith("mock-")
    prints = body["fingerprints"]
    assert set(prints) == {"snapshot", "chunk_index", "document_index"}
    for value in prints.values():
        assert isinstance(value, str) and len(value) == 16

    # fingerprint is a pure content hash: same bytes, same value
    snapshot_bytes = (root / "graph.jsonl").read_bytes()
    (root / "graph.jsonl").write_bytes(snapshot_bytes)
    assert client.get("/api/health").json()["fingerprints"]["snapshot"] == prints[
        "snapshot"
    ]


# --- sessions ---------------------------------------------------------------------


def test_session_lifecycle(client):
    session_id = client.post("/api/sessions").json()["session_id"]
    body = client.get(f"/api/sessions/{session_id}").json()
    assert body["session_id"] == session_id
    assert body["turns"] == []
    assert body["created_at"] > 0

    answer = client.post(
        f"/api/sessions/{session_id}/messages",
        json={"text": fixture_corpus.QUESTION},
    ).json()
    assert answer["text"] == fixture_corpus.FINAL_ANSWER_TEXT
    assert answer["degraded"] is False
    assert answer["steps"][0]["action"]["tool"] == "chunk_retriever"

    body = client.get(f"/api/sessions/{session_id}").json()
    assert len(body["turns"]) == 1
    assert body["turns"][0]["user_text"] == fixture_corpus.QUESTION
    assert body["turns"][0]["answer"] == answer


def test_unknown_session_404_contract(client):
    assert_error_shape(client.get("/api/sessions/nope"), 404, "session_not_found")
    assert_error_shape(
        client.post("/api/sessions/nope/messages", json={"text": "hi"}),
        404,
        "session_not_found",
    )


def test_message_validation(client):
    session_id = client.post("/api/sessions").json()["session_id"]
    assert_error_shape(
        client.post(f"/api/sessions/{session_id}/messages", json={"text": ""}),
        422,
        "invalid_request",
    )
    assert_error_shape(
        client.post(f"/api/sessions/{session_id}/messages", json={}),
        422,
        "invalid_request",
    )
    assert_error_shape(client.post("/api/query", json={"wrong": 1}), 422, "invalid_request")


# --- one-shot query -----------------------------------------------------------------


def test_query_is_ephemeral_and_matches_session_answer(client):
    answer = client.post("/api/query", json={"text": fixture_corpus.QUESTION}).json()
    assert answer["text"] == fixture_corpus.FINAL_ANSWER_TEXT
    assert answer["degraded"] is False
    refs = {e["ref"] for e in answer["evidence"]}
    assert "pat-001.txt#0000" in refs

    # every cited evidence id resolves through the search index
    for ref in refs:
        number = fixture_corpus.patent_number(int(ref[4:7]))
        hits = client.get("/api/search", params={"q": number}).json()["hits"]
        assert any(h["id"] == ref for h in hits)


# --- graph endpoints ---------------------------------------------------------------


def test_neighborhood_endpoint(client):
    body = client.get(
        "/api/graph/neighborhood", params={"entity": fixture_corpus.ORG}
    ).json()
    assert body["entity"]["type"] == "Company"
    assert body["entity"]["display_name"] == fixture_corpus.ORG
    assert len(body["nodes"]) == 20  # every patent is owned by the org
    assert all(node["type"] == "Patent" for node in body["nodes"])
    assert len(body["edges"]) == 20
    assert {e["rel_type"] for e in body["edges"]} == {"OWNED_BY"}
    assert body["edges"][0]["provenance"][0]["doc_id"] == "pat-001.txt"

    out_only = client.get(
        "/api/graph/neighborhood",
        params={"entity": "US-10001-A", "direction": "out"},
    ).json()
    assert {n["type"] for n in out_only["nodes"]} == {"Company", "Inventor"}

    assert_error_shape(
        client.get("/api/graph/neighborhood", params={"entity": "ghost"}),
        404,
        "entity_not_found",
    )
    assert_error_shape(
        client.get(
            "/api/graph/neighborhood",
            params={"entity": fixture_corpus.ORG, "direction": "sideways"},
        ),
        400,
        "invalid_request",
    )


def test_subgraph_endpoint(client):
    body = client.post(
        "/api/graph/subgraph",
        json={"keys": ["US-10001-A", "Alice Ash", "Ghost Entity"]},
    ).json()
    assert [n["key"] for n in body["nodes"]] == ["alice ash", "us-10001-a"]
    assert len(body["edges"]) == 1
    assert body["edges"][0]["rel_type"] == "INVENTED_BY"
    assert body["missing"] == ["Ghost Entity"]

    empty = client.post("/api/graph/subgraph", json={"keys": []}).json()
    assert empty == {"nodes": [], "edges": [], "missing": []}


# --- search and eval ----------------------------------------------------------------


def test_search_endpoint(client):
    body = client.get(
        "/api/search", params={"q": "US-10001-A inventor", "k": 3}
    ).json()
    hits = body["hits"]
    assert len(hits) == 3
    assert hits[0]["id"] == "pat-001.txt#0000"
    assert hits[0]["level"] == "chunk"
    assert hits[0]["source"] == "fused"
    assert "US-10001-A" in hits[0]["snippet"]
    assert hits[0]["metadata"]["source"].endswith("pat-001.txt")

    doc_hits = client.get(
        "/api/search", params={"q": "US-10001-A inventor", "level": "document"}
    ).json()["hits"]
    assert doc_hits[0]["id"] == "pat-001.txt"

    assert_error_shape(
        client.get("/api/search", params={"q": "x", "k": 0}), 400, "invalid_request"
    )
    assert_error_shape(
        client.get("/api/search", params={"q": "x", "level": "paragraph"}),
        400,
        "invalid_request",
    )


def test_eval_endpoint(client):
    body = client.get("/api/eval").json()
    assert body["rae_percent"] == 100.0
    assert body["ric_percent"] == 0.0
    assert body["in_cluster_percent"] == 100.0
    assert len(body["per_doc"]) == 20

    missing = client.get("/api/eval", params={"gold": "/nonexistent/gold.jsonl"})
    assert_error_shape(missing, 404, "artifact_missing")


def test_unmatched_route_shape(client):
    assert_error_shape(client.get("/api/nope"), 404, "http_error")


# --- optional wiring -----------------------------------------------------------------


def test_static_dir_mounts_ui(tmp_path):
    config_path = build_env(tmp_path)
    config = json.loads(config_path.read_text(encoding="utf-8"))
    config["service"] = {"static_dir": "web"}
    config_path.write_text(json.dumps(config), encoding="utf-8")
    web = tmp_path / "web"
    web.mkdir()
    (web / "index.html").write_text("<html>klipa ui</html>", encoding="utf-8")

    client = TestClient(create_app(load_config(config_path, env={})))
    response = client.get("/")
    assert response.status_code == 200
    assert "klipa ui" in response.text
    assert client.get("/api/health").json()["status"] == "ok"


def test_session_log_appends_jsonl(tmp_path):
    config_path = build_env(tmp_path)
    config = json.loads(config_path.read_text(encoding="utf-8"))
    config["service"] = {"session_log": "sessions.jsonl"}
    config_path.write_text(json.dumps(config), encoding="utf-8")

    client = TestClient(create_app(load_config(config_path, env={})))
    client.post("/api/query", json={"text": fixture_corpus.QUESTION})
    session_id = client.post("/api/sessions").json()["session_id"]
    client.post(f"/api/sessions/{session_id}/messages", json={"text": fixture_corpus.QUESTION})

    lines = (tmp_path / "sessions.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    entries = [json.loads(line) for line in lines]
    assert entries[1]["session_id"] == session_id
    assert entries[0]["query"] == fixture_corpus.QUESTION
    assert entries[0]["answer"]["text"] == fixture_corpus.FINAL_ANSWER_TEXT
    assert entries[0]["ts"] > 0
