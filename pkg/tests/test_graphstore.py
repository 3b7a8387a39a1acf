"""Graph store: MERGE semantics, batch writer, queries, snapshot files."""

import random

import pytest

from klipa.errors import (
    GraphBusy,
    IntegrityViolation,
    SelfLoopRejected,
    SnapshotParse,
    UnknownNode,
    WriterClosed,
)
from klipa.extraction import EntityRef, Provenance, Triple
from klipa.graphstore import (
    GraphStore,
    NodeRef,
    export_snapshot,
    import_snapshot,
)
from oracles import components_oracle


def triple(
    head: str,
    relation: str,
    tail: str,
    head_type: str = "Patent",
    tail_type: str = "Inventor",
    doc_id: str = "d",
    seq_id: int = 0,
) -> Triple:
    return Triple(
        head=EntityRef(key=head, type=head_type, display=head.title()),
        relation=relation,
        tail=EntityRef(key=tail, type=tail_type, display=tail.title()),
        provenance=Provenance(doc_id=doc_id, seq_id=seq_id),
    )


# --- merge semantics -----------------------------------------------------------


def test_merge_triple_idempotent():
    store = GraphStore()
    first = store.merge_triple(triple("p1", "INVENTED_BY", "ada"))
    assert first.created_nodes == 2
    assert first.created_edge is True
    again = store.merge_triple(triple("p1", "INVENTED_BY", "ada"))
    assert again.created_nodes == 0
    assert again.created_edge is False
    assert store.node_count() == 2
    assert store.edge_count() == 1


def test_remerge_unions_provenance():
    store = GraphStore()
    store.merge_triple(triple("p1", "INVENTED_BY", "ada", doc_id="b", seq_id=2))
    store.merge_triple(triple("p1", "INVENTED_BY", "ada", doc_id="a", seq_id=1))
    store.merge_triple(triple("p1", "INVENTED_BY", "ada", doc_id="a", seq_id=1))
    (edge,) = store.edges_of(NodeRef("p1", "Patent"))
    assert edge.provenance == (Provenance("a", 1), Provenance("b", 2))


def test_merge_entity_properties_are_create_only():
    store = GraphStore()
    ref = store.merge_entity("acme", "Company", "Acme", {"country": "US"})
    store.merge_entity("acme", "Company", "ACME GmbH", {"country": "DE", "year": "1999"})
    node = store.get_node(ref)
    assert node.display_name == "Acme"
    assert node.properties == (("country", "US"), ("year", "1999"))


def test_nodes_unique_on_key_and_type():
    store = GraphStore()
    store.merge_entity("ada", "Inventor")
    store.merge_entity("ada", "Company")
    assert store.node_count() == 2
    assert store.resolve_key("ada") == [
        NodeRef("ada", "Company"),
        NodeRef("ada", "Inventor"),
    ]
    assert store.resolve_key("nobody") == []


def test_self_loop_rejected_unless_allowed():
    store = GraphStore()
    loop = triple("p1", "REFERENCES", "p1", tail_type="Patent")
    with pytest.raises(SelfLoopRejected):
        store.merge_triple(loop)
    assert store.node_count() == 0

    permissive = GraphStore(allow_self_loops={"REFERENCES"})
    outcome = permissive.merge_triple(loop)
    assert outcome.created_edge is True
    assert permissive.node_count() == 1


# --- batch writer ----------------------------------------------------------------


def test_batch_writer_owns_write_access():
    store = GraphStore()
    writer = store.batch_writer()
    with pytest.raises(GraphBusy):
        store.merge_entity("x", "Patent")
    with pytest.raises(GraphBusy):
        store.merge_triple(triple("p1", "INVENTED_BY", "ada"))
    with pytest.raises(GraphBusy):
        store.batch_writer()
    writer.close()
    store.merge_entity("x", "Patent")  # released


def test_batch_writer_auto_flush_and_close():
    store = GraphStore()
    writer = store.batch_writer(batch_size=2)
    writer.add(triple("p1", "INVENTED_BY", "ada"))
    assert store.edge_count() == 0  # buffered
    writer.add(triple("p2", "INVENTED_BY", "bob"))
    assert store.edge_count() == 2  # auto-flush at batch_size
    writer.add(triple("p3", "INVENTED_BY", "cid"))
    writer.close()
    assert store.edge_count() == 3
    writer.close()  # idempotent
    with pytest.raises(WriterClosed):
        writer.add(triple("p4", "INVENTED_BY", "dee"))
    with pytest.raises(WriterClosed):
        writer.flush()


def test_batch_writer_context_manager_flushes():
    store = GraphStore()
    with store.batch_writer() as writer:
        writer.add(triple("p1", "INVENTED_BY", "ada"))
    assert store.edge_count() == 1
    store.merge_entity("free", "Patent")  # write access released


def test_batch_flush_is_all_or_nothing():
    store = GraphStore()
    store.merge_triple(triple("p0", "INVENTED_BY", "eve"))
    writer = store.batch_writer(batch_size=100)
    writer.add(triple("p1", "INVENTED_BY", "ada"))
    writer.add(triple("p1", "REFERENCES", "p1", tail_type="Patent"))
    writer.add(triple("p2", "INVENTED_BY", "bob"))
    with pytest.raises(SelfLoopRejected):
        writer.flush()
    assert store.node_count() == 2  # nothing from the batch applied
    assert store.edge_count() == 1

    with pytest.raises(ValueError):
        store2 = GraphStore()
        store2.batch_writer(batch_size=0)


# --- queries ----------------------------------------------------------------------


def star_store() -> GraphStore:
    store = GraphStore()
    store.merge_triple(triple("p1", "INVENTED_BY", "ada"))
    store.merge_triple(triple("p1", "OWNED_BY", "acme", tail_type="Company"))
    store.merge_triple(triple("p2", "REFERENCES", "p1", tail_type="Patent"))
    return store


def test_neighborhood_directions():
    store = star_store()
    p1 = NodeRef("p1", "Patent")
    assert store.neighborhood(p1, "out") == {
        NodeRef("ada", "Inventor"),
        NodeRef("acme", "Company"),
    }
    assert store.neighborhood(p1, "in") == {NodeRef("p2", "Patent")}
    assert store.neighborhood(p1) == store.neighborhood(p1, "out") | {
        NodeRef("p2", "Patent")
    }
    with pytest.raises(ValueError):
        store.neighborhood(p1, "sideways")
    with pytest.raises(UnknownNode):
        store.neighborhood(NodeRef("ghost", "Patent"))


def test_edges_of_direction_and_order():
    store = star_store()
    p1 = NodeRef("p1", "Patent")
    both = store.edges_of(p1)
    assert [(e.src.key, e.rel_type, e.dst.key) for e in both] == [
        ("p1", "INVENTED_BY", "ada"),
        ("p1", "OWNED_BY", "acme"),
        ("p2", "REFERENCES", "p1"),
    ]
    assert [e.rel_type for e in store.edges_of(p1, "out")] == [
        "INVENTED_BY",
        "OWNED_BY",
    ]
    assert [e.rel_type for e in store.edges_of(p1, "in")] == ["REFERENCES"]
    with pytest.raises(UnknownNode):
        store.edges_of(NodeRef("ghost", "Patent"))


def test_induced_subgraph_keeps_internal_edges_only():
    store = star_store()
    sub = store.induced_subgraph({NodeRef("p1", "Patent"), NodeRef("p2", "Patent")})
    assert [n.key for n in sub.nodes] == ["p1", "p2"]
    assert [(e.src.key, e.rel_type, e.dst.key) for e in sub.edges] == [
        ("p2", "REFERENCES", "p1")
    ]
    with pytest.raises(UnknownNode):
        store.induced_subgraph({NodeRef("ghost", "Patent")})


def test_connected_components_deterministic():
    store = star_store()
    store.merge_entity("island", "Technology")
    components = store.connected_components()
    assert [[(r.type, r.key) for r in c] for c in components] == [
        [
            ("Company", "acme"),
            ("Inventor", "ada"),
            ("Patent", "p1"),
            ("Patent", "p2"),
        ],
        [("Technology", "island")],
    ]


def test_validate_integrity_detects_dangling_edge():
    store = star_store()
    store.validate_integrity()
    del store._nodes[NodeRef("ada", "Inventor")]  # simulate corruption
    with pytest.raises(IntegrityViolation):
        store.validate_integrity()


# --- snapshot files -----------------------------------------------------------------


def test_snapshot_export_import_round_trip(tmp_path):
    store = star_store()
    store.schema_fingerprint = "abc123"
    snapshot = store.snapshot()
    path = tmp_path / "graph.jsonl"
    export_snapshot(snapshot, path)
    loaded = import_snapshot(path)
    assert loaded.nodes == snapshot.nodes
    assert loaded.edges == snapshot.edges
    assert loaded.schema_fingerprint == "abc123"

    again = tmp_path / "again.jsonl"
    export_snapshot(GraphStore.from_snapshot(loaded).snapshot(), again)
    assert again.read_bytes() == path.read_bytes()


def test_snapshot_export_is_byte_stable(tmp_path):
    store = star_store()
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    export_snapshot(store.snapshot(), a)
    export_snapshot(store.snapshot(), b)
    assert a.read_bytes() == b.read_bytes()


def test_import_snapshot_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        import_snapshot(tmp_path / "absent.jsonl")


def test_import_snapshot_parse_errors(tmp_path):
    path = tmp_path / "bad.jsonl"

    path.write_text('{"nope": 1}\n', encoding="utf-8")
    with pytest.raises(SnapshotParse) as info:
        import_snapshot(path)
    assert info.value.line_no == 1

    path.write_text('{"version": 99}\n', encoding="utf-8")
    with pytest.raises(SnapshotParse, match="version"):
        import_snapshot(path)

    path.write_text('{"version": 1}\n{broken\n', encoding="utf-8")
    with pytest.raises(SnapshotParse) as info:
        import_snapshot(path)
    assert info.value.line_no == 2
    assert "line 2" in str(info.value)

    path.write_text('{"version": 1}\n{"other": {}}\n', encoding="utf-8")
    with pytest.raises(SnapshotParse) as info:
        import_snapshot(path)
    assert info.value.line_no == 2

    path.write_text('{"version": 1}\n{"node": {"key": "x"}}\n', encoding="utf-8")
    with pytest.raises(SnapshotParse) as info:
        import_snapshot(path)
    assert info.value.line_no == 2


def test_import_snapshot_rejects_dangling_edge(tmp_path):
    path = tmp_path / "dangling.jsonl"
    path.write_text(
        '{"version": 1}\n'
        '{"node": {"key": "p1", "type": "Patent"}}\n'
        '{"edge": {"src": {"key": "p1", "type": "Patent"},'
        ' "dst": {"key": "ghost", "type": "Inventor"},'
        ' "rel_type": "INVENTED_BY", "provenance": []}}\n',
        encoding="utf-8",
    )
    with pytest.raises(IntegrityViolation, match="ghost"):
        import_snapshot(path)


# --- randomized equivalence ---------------------------------------------------------


def random_triples(rng: random.Random, count: int) -> list[Triple]:
    types = ("Patent", "Inventor", "Company")
    out = []
    for _ in range(count):
        head = (f"e{rng.randrange(12)}", rng.choice(types))
        tail = (f"e{rng.randrange(12)}", rng.choice(types))
        if head == tail:
            tail = (f"e{rng.randrange(12)}", "Technology")
        out.append(
            Triple(
                head=EntityRef(key=head[0], type=head[1], display=head[0]),
                relation=rng.choice(("R1", "R2", "R3")),
                tail=EntityRef(key=tail[0], type=tail[1], display=tail[0]),
                provenance=Provenance(
                    doc_id=f"doc-{rng.randrange(5)}", seq_id=rng.randrange(4)
                ),
            )
        )
    return out


def test_random_multisets_permutation_and_batch_equivalence():
    rng = random.Random(20240818)
    for _ in range(25):
        triples = random_triples(rng, rng.randrange(1, 120))

        single = GraphStore()
        for t in triples:
            single.merge_triple(t)

        shuffled = list(triples)
        rng.shuffle(shuffled)
        permuted = GraphStore()
        for t in shuffled:
            permuted.merge_triple(t)

        batched = GraphStore()
        with batched.batch_writer(batch_size=rng.randrange(1, 40)) as writer:
            for t in triples:
                writer.add(t)
                batched.validate_integrity()

        base = single.snapshot()
        assert permuted.snapshot() == base
        assert batched.snapshot() == base

        refs = {node.ref() for node in base.nodes}
        assert len(refs) == len(base.nodes)  # uniqueness on (key, type)
        edge_keys = {(e.src, e.dst, e.rel_type) for e in base.edges}
        assert len(edge_keys) == len(base.edges)

        expected = components_oracle(
            refs, [(e.src, e.dst) for e in base.edges]
        )
        actual = {frozenset(c) for c in single.connected_components()}
        assert actual == expected
