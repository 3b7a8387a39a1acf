"""Extraction quality metrics over gold annotations.

Two headline numbers: relation/entity accuracy (RAE), the percentage of
gold entity strings recovered as a triple endpoint in the matching
document's extractions, and incorrect-clustering (RIC), the percentage
of patents whose node sits outside the owning organization's connected
component. Spurious extra extractions never lower RAE; they surface in a
separate per-document column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import EmptyReport, MissingExtraction, UnknownOrg
from .extraction import ExtractionReport, Triple, canonical_key
from .graphstore import GraphSnapshot, GraphStore, NodeRef


@dataclass(frozen=True)
class GoldRecord:
    """Gold annotations for one document.

    entities maps a field name (patent_number, inventors, ...) to the
    gold strings for that field; org_key names the owning organization.
    By convention the first patent_number string is the patent's node key.
    """

    doc_id: str
    entities: tuple[tuple[str, tuple[str, ...]], ...]
    org_key: str

    def all_strings(self) -> list[str]:
        return [s for _, values in self.entities for s in values]

    def patent_key(self) -> str | None:
        for name, values in self.entities:
            if name == "patent_number" and values:
                return values[0]
        return None


def load_gold(path: str | Path) -> list[GoldRecord]:
    records: list[GoldRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                entities = tuple(
                    (str(name), tuple(str(v) for v in values))
                    for name, values in data["entities"].items()
                )
                records.append(
                    GoldRecord(
                        doc_id=str(data["doc_id"]),
                        entities=entities,
                        org_key=str(data["org_key"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"gold line {line_no} is malformed: {exc}") from exc
    return records


@dataclass
class DocEval:
    doc_id: str
    n_accurate: int = 0
    n_total: int = 0
    spurious: int = 0
    time_s: float = 0.0
    in_main_cluster: bool = True


@dataclass
class EvalReport:
    label: str
    rae_percent: float
    ric_percent: float
    mean_time_s: float
    per_doc: list[DocEval] = field(default_factory=list)

    @property
    def in_cluster_percent(self) -> float:
        # defined as the exact complement so RIC + in-cluster == 100.0
        return 100.0 - self.ric_percent

    def to_json_obj(self) -> dict:
        return {
            "label": self.label,
            "rae_percent": self.rae_percent,
            "ric_percent": self.ric_percent,
            "in_cluster_percent": self.in_cluster_percent,
            "mean_time_s": self.mean_time_s,
            "per_doc": [
                {
                    "doc_id": d.doc_id,
                    "n_accurate": d.n_accurate,
                    "n_total": d.n_total,
                    "spurious": d.spurious,
                    "time_s": d.time_s,
                    "in_main_cluster": d.in_main_cluster,
                }
                for d in self.per_doc
            ],
        }


def _percent(numerator: int, denominator: int) -> float:
    # n * 100 / d keeps exact halves exact (3 of 40 -> 7.5, not 7.5000...01)
    return (numerator * 100.0) / denominator


def rae(
    extracted: Mapping[str, Iterable[Triple]], gold: list[GoldRecord]
) -> tuple[float, list[DocEval]]:
    """Recall of gold entity strings against extracted triple endpoints.

    A gold string counts as accurate when some triple of the same
    document has an endpoint whose canonical key equals the gold string's
    canonical key. Raises MissingExtraction when a gold doc_id has no
    entry in the mapping (an empty list is a valid entry).
    """
    if not gold:
        raise EmptyReport("no gold records")
    rows: list[DocEval] = []
    total_accurate = 0
    total_gold = 0
    for record in gold:
        if record.doc_id not in extracted:
            raise MissingExtraction(record.doc_id)
        triples = list(extracted[record.doc_id])
        endpoint_keys = {t.head.key for t in triples} | {t.tail.key for t in triples}
        gold_keys = {canonical_key(s) for s in record.all_strings()}
        row = DocEval(doc_id=record.doc_id, n_total=len(record.all_strings()))
        for gold_string in record.all_strings():
            if canonical_key(gold_string) in endpoint_keys:
                row.n_accurate += 1
        row.spurious = len(endpoint_keys - gold_keys)
        rows.append(row)
        total_accurate += row.n_accurate
        total_gold += row.n_total
    if total_gold == 0:
        raise EmptyReport("gold records contain zero entity strings")
    return _percent(total_accurate, total_gold), rows


def _find_org(snapshot_store: GraphStore, org_key: str) -> NodeRef:
    candidates = snapshot_store.resolve_key(canonical_key(org_key))
    if not candidates:
        raise UnknownOrg(f"org '{org_key}' is not in the graph")
    for ref in candidates:
        if ref.type == "Company":
            return ref
    return candidates[0]


def ric(
    snapshot: GraphSnapshot,
    org_key: str,
    patent_keys: Mapping[str, str],
) -> tuple[float, dict[str, bool]]:
    """Share of patents outside the org's undirected connected component.

    patent_keys maps doc_id to the patent's node key. A patent whose node
    is absent from the graph counts as misclassified.
    """
    if not patent_keys:
        raise EmptyReport("no patents to classify")
    store = GraphStore.from_snapshot(snapshot)
    org_ref = _find_org(store, org_key)
    main_cluster: set[NodeRef] = set()
    for component in store.connected_components():
        if org_ref in component:
            main_cluster = set(component)
            break
    in_cluster: dict[str, bool] = {}
    misclassified = 0
    for doc_id in sorted(patent_keys):
        key = canonical_key(patent_keys[doc_id])
        ref = NodeRef(key=key, type="Patent")
        ok = ref in store and ref in main_cluster
        in_cluster[doc_id] = ok
        if not ok:
            misclassified += 1
    return _percent(misclassified, len(patent_keys)), in_cluster


def timing(report: ExtractionReport) -> float:
    """Arithmetic mean of per-document extraction wall times."""
    if not report.per_doc:
        raise EmptyReport("extraction report has no documents")
    return sum(d.time_s for d in report.per_doc) / len(report.per_doc)


def evaluate(
    gold: list[GoldRecord],
    extracted: Mapping[str, Iterable[Triple]],
    snapshot: GraphSnapshot,
    report: ExtractionReport,
    label: str = "corpus",
) -> EvalReport:
    """Combine RAE, RIC, and timing into one report.

    The aggregate numbers are recomputable from the per-document rows
    (same formulas, same inputs) to within float round-off.
    """
    rae_percent, rows = rae(extracted, gold)
    org_key = gold[0].org_key
    patent_keys = {
        record.doc_id: record.patent_key()
        for record in gold
        if record.patent_key() is not None
    }
    ric_percent, in_cluster = ric(snapshot, org_key, patent_keys)
    times = {d.doc_id: d.time_s for d in report.per_doc}
    for row in rows:
        row.time_s = times.get(row.doc_id, 0.0)
        row.in_main_cluster = in_cluster.get(row.doc_id, False)
    return EvalReport(
        label=label,
        rae_percent=rae_percent,
        ric_percent=ric_percent,
        mean_time_s=timing(report),
        per_doc=rows,
    )


def triples_by_doc(
    triples: Iterable[Triple], doc_ids: Iterable[str]
) -> dict[str, list[Triple]]:
    """Group triples by provenance doc, seeding every known doc with an
    empty list so absent extractions are distinguishable from missing
    documents."""
    grouped: dict[str, list[Triple]] = {doc_id: [] for doc_id in doc_ids}
    for triple in triples:
        grouped.setdefault(triple.provenance.doc_id, []).append(triple)
    return grouped


def render_report(report: EvalReport, fmt: str = "table") -> str:
    """Render as a fixed-format table row or as JSON with per-doc detail."""
    if fmt == "json":
        return json.dumps(report.to_json_obj(), indent=2, sort_keys=True)
    if fmt != "table":
        raise ValueError("format must be 'table' or 'json'")
    header = "label | Time (s) | RAE | RIC"
    rule = "-" * len(header)
    row = (
        f"{report.label} | {report.mean_time_s:.2f} | "
        f"{report.rae_percent:.2f}% | {report.ric_percent:.2f}%"
    )
    return "\n".join((header, rule, row))
