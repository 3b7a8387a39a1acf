"""In-process property graph with MERGE semantics and snapshot files.

Nodes are unique on (key, type) with create-only property sets; edges are
unique on (src, dst, rel_type) and union their provenance on re-merge, so
inserting the same triples in any order or batching produces the same
graph. Snapshots serialize to JSON-lines in a canonical order (header,
nodes sorted by (type, key), edges sorted by (src, rel_type, dst)) and
are therefore byte-stable across runs.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    GraphBusy,
    IntegrityViolation,
    SelfLoopRejected,
    SnapshotParse,
    UnknownNode,
    WriterClosed,
)
from .extraction import Provenance, Triple

SNAPSHOT_VERSION = 1

DIRECTIONS = ("out", "in", "both")


@dataclass(frozen=True)
class NodeRef:
    key: str
    type: str

    def sort_key(self) -> tuple[str, str]:
        return (self.type, self.key)


@dataclass(frozen=True)
class EntityNode:
    key: str
    type: str
    display_name: str
    properties: tuple[tuple[str, str], ...] = ()

    def ref(self) -> NodeRef:
        return NodeRef(key=self.key, type=self.type)


@dataclass(frozen=True)
class RelationEdge:
    src: NodeRef
    dst: NodeRef
    rel_type: str
    provenance: tuple[Provenance, ...] = ()

    def sort_key(self) -> tuple:
        return (self.src.sort_key(), self.rel_type, self.dst.sort_key())


@dataclass(frozen=True)
class MergeOutcome:
    created_nodes: int
    created_edge: bool


@dataclass(frozen=True)
class GraphSnapshot:
    """Immutable, canonically ordered view of a graph."""

    nodes: tuple[EntityNode, ...]
    edges: tuple[RelationEdge, ...]
    schema_fingerprint: str = ""
    created_at: float = field(default=0.0, compare=False)


class _NodeRecord:
    __slots__ = ("display_name", "properties")

    def __init__(self, display_name: str) -> None:
        self.display_name = display_name
        self.properties: dict[str, str] = {}


class GraphStore:
    """Mutable graph with one writer at a time and atomic batch flushes."""

    def __init__(
        self,
        schema_fingerprint: str = "",
        allow_self_loops: frozenset[str] | set[str] = frozenset(),
    ) -> None:
        self.schema_fingerprint = schema_fingerprint
        self._allow_self_loops = frozenset(allow_self_loops)
        self._nodes: dict[NodeRef, _NodeRecord] = {}
        self._edges: dict[tuple[NodeRef, NodeRef, str], set[Provenance]] = {}
        self._out: dict[NodeRef, set[NodeRef]] = {}
        self._in: dict[NodeRef, set[NodeRef]] = {}
        self._lock = threading.RLock()
        self._writer_open = False

    # --- mutation ---------------------------------------------------------

    def _merge_entity_locked(
        self,
        key: str,
        type: str,
        display_name: str | None = None,
        properties: dict[str, str] | None = None,
    ) -> tuple[NodeRef, bool]:
        ref = NodeRef(key=key, type=type)
        record = self._nodes.get(ref)
        created = record is None
        if record is None:
            record = _NodeRecord(display_name=display_name or key)
            self._nodes[ref] = record
            self._out.setdefault(ref, set())
            self._in.setdefault(ref, set())
        if properties:
            for name, value in properties.items():  # create-only semantics
                record.properties.setdefault(str(name), str(value))
        return ref, created

    def _merge_triple_locked(self, triple: Triple) -> MergeOutcome:
        src_ref = NodeRef(key=triple.head.key, type=triple.head.type)
        dst_ref = NodeRef(key=triple.tail.key, type=triple.tail.type)
        if src_ref == dst_ref and triple.relation not in self._allow_self_loops:
            raise SelfLoopRejected(
                f"self-loop on {src_ref.key} ({src_ref.type}) "
                f"via {triple.relation} is not allowed"
            )
        created = 0
        _, was_new = self._merge_entity_locked(
            src_ref.key, src_ref.type, triple.head.display or src_ref.key
        )
        created += int(was_new)
        _, was_new = self._merge_entity_locked(
            dst_ref.key, dst_ref.type, triple.tail.display or dst_ref.key
        )
        created += int(was_new)
        edge_key = (src_ref, dst_ref, triple.relation)
        provenance = self._edges.get(edge_key)
        created_edge = provenance is None
        if provenance is None:
            provenance = set()
            self._edges[edge_key] = provenance
            self._out[src_ref].add(dst_ref)
            self._in[dst_ref].add(src_ref)
        provenance.add(triple.provenance)
        return MergeOutcome(created_nodes=created, created_edge=created_edge)

    def _check_writable(self) -> None:
        if self._writer_open:
            raise GraphBusy("a batch writer owns write access")

    def merge_entity(
        self,
        key: str,
        type: str,
        display_name: str | None = None,
        properties: dict[str, str] | None = None,
    ) -> NodeRef:
        """Create the node if absent; existing property values win."""
        with self._lock:
            self._check_writable()
            ref, _ = self._merge_entity_locked(key, type, display_name, properties)
            return ref

    def merge_triple(self, triple: Triple) -> MergeOutcome:
        with self._lock:
            self._check_writable()
            return self._merge_triple_locked(triple)

    def batch_writer(self, batch_size: int = 100) -> "BatchWriter":
        with self._lock:
            self._check_writable()
            self._writer_open = True
        return BatchWriter(self, batch_size=batch_size)

    # --- queries ------------------------------------------------------------

    def __contains__(self, ref: NodeRef) -> bool:
        with self._lock:
            return ref in self._nodes

    def node_count(self) -> int:
        with self._lock:
            return len(self._nodes)

    def edge_count(self) -> int:
        with self._lock:
            return len(self._edges)

    def get_node(self, ref: NodeRef) -> EntityNode:
        with self._lock:
            record = self._nodes.get(ref)
            if record is None:
                raise UnknownNode(f"{ref.key} ({ref.type})")
            return EntityNode(
                key=ref.key,
                type=ref.type,
                display_name=record.display_name,
                properties=tuple(sorted(record.properties.items())),
            )

    def resolve_key(self, key: str) -> list[NodeRef]:
        """All nodes whose key matches, across types, in (type, key) order."""
        with self._lock:
            return sorted(
                (ref for ref in self._nodes if ref.key == key),
                key=NodeRef.sort_key,
            )

    def neighborhood(self, ref: NodeRef, direction: str = "both") -> set[NodeRef]:
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        with self._lock:
            if ref not in self._nodes:
                raise UnknownNode(f"{ref.key} ({ref.type})")
            neighbors: set[NodeRef] = set()
            if direction in ("out", "both"):
                neighbors |= self._out.get(ref, set())
            if direction in ("in", "both"):
                neighbors |= self._in.get(ref, set())
            return neighbors

    def edges_of(self, ref: NodeRef, direction: str = "both") -> list[RelationEdge]:
        """Incident edges in canonical order."""
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        with self._lock:
            if ref not in self._nodes:
                raise UnknownNode(f"{ref.key} ({ref.type})")
            out: list[RelationEdge] = []
            for (src, dst, rel_type), provenance in self._edges.items():
                outgoing = direction in ("out", "both") and src == ref
                incoming = direction in ("in", "both") and dst == ref
                if not (outgoing or incoming):
                    continue
                out.append(
                    RelationEdge(
                        src=src,
                        dst=dst,
                        rel_type=rel_type,
                        provenance=tuple(
                            sorted(provenance, key=lambda p: (p.doc_id, p.seq_id))
                        ),
                    )
                )
            out.sort(key=RelationEdge.sort_key)
            return out

    def induced_subgraph(self, refs: set[NodeRef] | list[NodeRef]) -> GraphSnapshot:
        """Subgraph on exactly the given nodes plus edges between them."""
        wanted = set(refs)
        with self._lock:
            for ref in wanted:
                if ref not in self._nodes:
                    raise UnknownNode(f"{ref.key} ({ref.type})")
            nodes = tuple(
                self.get_node(ref) for ref in sorted(wanted, key=NodeRef.sort_key)
            )
            edges = []
            for (src, dst, rel_type), provenance in self._edges.items():
                if src in wanted and dst in wanted:
                    edges.append(
                        RelationEdge(
                            src=src,
                            dst=dst,
                            rel_type=rel_type,
                            provenance=tuple(
                                sorted(provenance, key=lambda p: (p.doc_id, p.seq_id))
                            ),
                        )
                    )
            edges.sort(key=RelationEdge.sort_key)
            return GraphSnapshot(
                nodes=nodes,
                edges=tuple(edges),
                schema_fingerprint=self.schema_fingerprint,
                created_at=time.time(),
            )

    def connected_components(self) -> list[list[NodeRef]]:
        """Undirected components; deterministic order (components by their
        smallest member, members sorted by (type, key))."""
        with self._lock:
            adjacency: dict[NodeRef, set[NodeRef]] = {
                ref: set() for ref in self._nodes
            }
            for src, dst, _ in self._edges:
                adjacency[src].add(dst)
                adjacency[dst].add(src)
            seen: set[NodeRef] = set()
            components: list[list[NodeRef]] = []
            for start in self._nodes:
                if start in seen:
                    continue
                stack = [start]
                members: list[NodeRef] = []
                seen.add(start)
                while stack:
                    current = stack.pop()
                    members.append(current)
                    for neighbor in adjacency[current]:
                        if neighbor not in seen:
                            seen.add(neighbor)
                            stack.append(neighbor)
                components.append(sorted(members, key=NodeRef.sort_key))
            components.sort(key=lambda m: m[0].sort_key())
            return components

    def snapshot(self) -> GraphSnapshot:
        with self._lock:
            nodes = tuple(
                self.get_node(ref)
                for ref in sorted(self._nodes, key=NodeRef.sort_key)
            )
            edges = tuple(
                sorted(
                    (
                        RelationEdge(
                            src=src,
                            dst=dst,
                            rel_type=rel_type,
                            provenance=tuple(
                                sorted(prov, key=lambda p: (p.doc_id, p.seq_id))
                            ),
                        )
                        for (src, dst, rel_type), prov in self._edges.items()
                    ),
                    key=RelationEdge.sort_key,
                )
            )
            return GraphSnapshot(
                nodes=nodes,
                edges=edges,
                schema_fingerprint=self.schema_fingerprint,
                created_at=time.time(),
            )

    def validate_integrity(self) -> None:
        """Uniqueness and referential integrity; raises on violation."""
        with self._lock:
            for (src, dst, rel_type) in self._edges:
                for endpoint in (src, dst):
                    if endpoint not in self._nodes:
                        raise IntegrityViolation(
                            f"edge {src.key}-{rel_type}->{dst.key} references "
                            f"missing node {endpoint.key} ({endpoint.type})"
                        )

    @classmethod
    def from_snapshot(
        cls,
        snapshot: GraphSnapshot,
        allow_self_loops: frozenset[str] | set[str] = frozenset(),
    ) -> "GraphStore":
        store = cls(
            schema_fingerprint=snapshot.schema_fingerprint,
            allow_self_loops=allow_self_loops,
        )
        for node in snapshot.nodes:
            store._merge_entity_locked(
                node.key, node.type, node.display_name, dict(node.properties)
            )
        for edge in snapshot.edges:
            for endpoint in (edge.src, edge.dst):
                if endpoint not in store._nodes:
                    raise IntegrityViolation(
                        f"edge {edge.src.key}-{edge.rel_type}->{edge.dst.key} "
                        f"references missing node {endpoint.key} ({endpoint.type})"
                    )
            provenance = store._edges.setdefault(
                (edge.src, edge.dst, edge.rel_type), set()
            )
            provenance.update(edge.provenance)
            store._out[edge.src].add(edge.dst)
            store._in[edge.dst].add(edge.src)
        return store


class BatchWriter:
    """Buffers triples and applies them in atomic batches.

    add() auto-flushes when the buffer reaches batch_size; close() flushes
    the remainder and releases write access. Readers observe pre-flush or
    post-flush state, never a partial batch.
    """

    def __init__(self, store: GraphStore, batch_size: int = 100) -> None:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self._store = store
        self._batch_size = batch_size
        self._buffer: list[Triple] = []
        self._closed = False

    def __enter__(self) -> "BatchWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if not self._closed:
            self.close()

    def add(self, triple: Triple) -> None:
        if self._closed:
            raise WriterClosed("add() after close()")
        self._buffer.append(triple)
        if len(self._buffer) >= self._batch_size:
            self.flush()

    def flush(self) -> None:
        if self._closed:
            raise WriterClosed("flush() after close()")
        if not self._buffer:
            return
        with self._store._lock:
            # pre-validate so the whole batch applies or none of it does
            for triple in self._buffer:
                src = NodeRef(key=triple.head.key, type=triple.head.type)
                dst = NodeRef(key=triple.tail.key, type=triple.tail.type)
                if src == dst and triple.relation not in self._store._allow_self_loops:
                    raise SelfLoopRejected(
                        f"self-loop on {src.key} ({src.type}) via "
                        f"{triple.relation} is not allowed"
                    )
            for triple in self._buffer:
                self._store._merge_triple_locked(triple)
        self._buffer.clear()

    def close(self) -> None:
        if self._closed:
            return
        try:
            self.flush()
        finally:
            self._closed = True
            with self._store._lock:
                self._store._writer_open = False


# --- snapshot files -----------------------------------------------------------


def export_snapshot(snapshot: GraphSnapshot, path: str | Path) -> None:
    """Write the canonical JSON-lines snapshot file.

    Line 1 is the header; node lines precede edge lines; ordering and key
    order are fixed so equal graphs produce byte-identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "version": SNAPSHOT_VERSION,
                    "schema_fingerprint": snapshot.schema_fingerprint,
                },
                sort_keys=True,
            )
            + "\n"
        )
        for node in snapshot.nodes:
            fh.write(
                json.dumps(
                    {
                        "node": {
                            "key": node.key,
                            "type": node.type,
                            "display_name": node.display_name,
                            "properties": dict(node.properties),
                        }
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        for edge in snapshot.edges:
            fh.write(
                json.dumps(
                    {
                        "edge": {
                            "src": {"key": edge.src.key, "type": edge.src.type},
                            "dst": {"key": edge.dst.key, "type": edge.dst.type},
                            "rel_type": edge.rel_type,
                            "provenance": [
                                {"doc_id": p.doc_id, "seq_id": p.seq_id}
                                for p in edge.provenance
                            ],
                        }
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def import_snapshot(path: str | Path) -> GraphSnapshot:
    """Read and validate a snapshot file.

    Raises SnapshotParse (with line number) on malformed lines and
    IntegrityViolation when an edge references a missing node.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    nodes: list[EntityNode] = []
    edges: list[RelationEdge] = []
    refs: set[NodeRef] = set()
    schema_fingerprint = ""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise SnapshotParse(
                    f"line {line_no} is not valid JSON: {exc}", line_no=line_no
                ) from exc
            if line_no == 1:
                if not isinstance(data, dict) or "version" not in data:
                    raise SnapshotParse(
                        "line 1 must be a header with 'version'", line_no=1
                    )
                if data["version"] != SNAPSHOT_VERSION:
                    raise SnapshotParse(
                        f"unsupported snapshot version {data['version']}", line_no=1
                    )
                schema_fingerprint = str(data.get("schema_fingerprint", ""))
                continue
            try:
                if "node" in data:
                    n = data["node"]
                    node = EntityNode(
                        key=str(n["key"]),
                        type=str(n["type"]),
                        display_name=str(n.get("display_name", n["key"])),
                        properties=tuple(
                            sorted(
                                (str(k), str(v))
                                for k, v in (n.get("properties") or {}).items()
                            )
                        ),
                    )
                    nodes.append(node)
                    refs.add(node.ref())
                elif "edge" in data:
                    e = data["edge"]
                    edges.append(
                        RelationEdge(
                            src=NodeRef(
                                key=str(e["src"]["key"]), type=str(e["src"]["type"])
                            ),
                            dst=NodeRef(
                                key=str(e["dst"]["key"]), type=str(e["dst"]["type"])
                            ),
                            rel_type=str(e["rel_type"]),
                            provenance=tuple(
                                sorted(
                                    (
                                        Provenance(
                                            doc_id=str(p["doc_id"]),
                                            seq_id=int(p["seq_id"]),
                                        )
                                        for p in e.get("provenance", [])
                                    ),
                                    key=lambda p: (p.doc_id, p.seq_id),
                                )
                            ),
                        )
                    )
                else:
                    raise SnapshotParse(
                        f"line {line_no} has neither 'node' nor 'edge'",
                        line_no=line_no,
                    )
            except (KeyError, TypeError, ValueError) as exc:
                raise SnapshotParse(
                    f"line {line_no} is malformed: {exc}", line_no=line_no
                ) from exc
    for edge in edges:
        for endpoint in (edge.src, edge.dst):
            if endpoint not in refs:
                raise IntegrityViolation(
                    f"edge {edge.src.key}-{edge.rel_type}->{edge.dst.key} "
                    f"references missing node {endpoint.key} ({endpoint.type})"
                )
    return GraphSnapshot(
        nodes=tuple(sorted(nodes, key=lambda n: (n.type, n.key))),
        edges=tuple(sorted(edges, key=RelationEdge.sort_key)),
        schema_fingerprint=schema_fingerprint,
        created_at=time.time(),
    )
