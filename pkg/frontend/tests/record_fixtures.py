"""Regenerate fixtures.json by recording real responses from the
fixture-backed service.

Usage: python3 tests/record_fixtures.py  (from frontend/)

The recorded payloads keep the UI tests honest: every shape the fake
fetch replays was produced by the actual server at recording time.
"""

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from fastapi.testclient import TestClient

import fixture_corpus
from conftest import build_env
from klipa.config import load_config
from klipa.gateway import MockGateway
from klipa.service import create_app

OUT = Path(__file__).with_name("fixtures.json")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        config = load_config(build_env(Path(tmp)), env={})
        client = TestClient(create_app(config))
        q = fixture_corpus.QUESTION

        fixtures: dict = {"question": q, "org": fixture_corpus.ORG}
        fixtures["health"] = client.get("/api/health").json()
        fixtures["query_answer"] = client.post("/api/query", json={"text": q}).json()

        sid = client.post("/api/sessions").json()["session_id"]
        client.post(f"/api/sessions/{sid}/messages", json={"text": q})
        fixtures["session"] = client.get(f"/api/sessions/{sid}").json()

        fixtures["neighborhood_org"] = client.get(
            "/api/graph/neighborhood", params={"entity": fixture_corpus.ORG}
        ).json()
        fixtures["neighborhood_patent"] = client.get(
            "/api/graph/neighborhood", params={"entity": "US-10001-A"}
        ).json()
        missing = client.get("/api/graph/neighborhood", params={"entity": "Ghost"})
        fixtures["error_unknown_entity"] = {
            "status": missing.status_code,
            "body": missing.json(),
        }
        absent = client.get("/api/sessions/absent")
        fixtures["error_missing_session"] = {
            "status": absent.status_code,
            "body": absent.json(),
        }
        fixtures["search_chunk"] = client.get(
            "/api/search", params={"q": "US-10001-A inventor", "level": "chunk", "k": 5}
        ).json()

        degraded_gateway = MockGateway(
            {
                "dim": 256,
                "replies": [
                    "Thought: Nothing in the corpus matches.\n"
                    "Final Answer: No supporting passages were found."
                ],
            }
        )
        degraded_client = TestClient(create_app(config, gateway=degraded_gateway))
        fixtures["degraded_answer"] = degraded_client.post(
            "/api/query", json={"text": "anything else"}
        ).json()

        graph_gateway = MockGateway(
            {
                "dim": 256,
                "replies": [
                    "Thought: Inspect the organization's neighborhood.\n"
                    "Action: graph_neighborhood\n"
                    f"Action Input: {fixture_corpus.ORG}",
                    "Thought: The neighbors are listed.\n"
                    f"Final Answer: {fixture_corpus.ORG} owns twenty patents.",
                ],
            }
        )
        graph_client = TestClient(create_app(config, gateway=graph_gateway))
        fixtures["graph_answer"] = graph_client.post(
            "/api/query", json={"text": "Who owns the portfolio?"}
        ).json()

    OUT.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
