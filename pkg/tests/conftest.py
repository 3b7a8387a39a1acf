"""Shared fixtures: a built fixture corpus with graph and index artifacts."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixture_corpus  # noqa: E402

from klipa.config import load_config  # noqa: E402
from klipa.engine import build_gateway, run_build, run_index  # noqa: E402


def write_env(root: Path, variant: str = "exact", with_agent: bool = True) -> Path:
    """Write corpus, mock fixture, gold file, and config under root;
    returns the config path."""
    corpus_dir = root / "corpus"
    fixture_corpus.write_corpus(corpus_dir)
    fixture_corpus.write_gold(root / "gold.jsonl")
    fixture = fixture_corpus.make_fixture(variant, with_agent=with_agent)
    (root / "fixture.json").write_text(json.dumps(fixture), encoding="utf-8")
    config = {
        "corpus": "corpus",
        "cache_dir": ".cache",
        "gold": "gold.jsonl",
        "gateway": {"mode": "mock", "fixture": "fixture.json"},
    }
    config_path = root / "klipa.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return config_path


def build_env(root: Path, variant: str = "exact", with_agent: bool = True) -> Path:
    """write_env plus a full build-kg + index run; returns the config path."""
    config_path = write_env(root, variant, with_agent)
    cfg = load_config(config_path, env={})
    gateway = build_gateway(cfg)
    run_build(cfg, gateway)
    run_index(cfg, gateway)
    return config_path


@pytest.fixture(scope="session")
def built_env(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Session-wide built artifacts for the exact fixture corpus."""
    root = tmp_path_factory.mktemp("fixture-env")
    return build_env(root)
