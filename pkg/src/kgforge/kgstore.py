"""Typed knowledge graph: merge voted triples, persist as CSV, report stats.

Node identity is (normalized label, node type); edge identity is
(subject, relation, object). Confidence of a merged edge is the max of
the contributing per-document confidences, and every edge keeps its full
per-document provenance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .schema import NodeType, RelationType, UnknownRelation, expected_object_type, validate_relation
from .voting import EmptyAfterNormalization, VotedTriple, normalize_text


class MalformedRow(ValueError):
    """CSV row with the wrong shape or inconsistent values."""


class SchemaViolation(ValueError):
    """CSV row referencing a relation outside the nine-relation schema."""


class DanglingProvenance(ValueError):
    """Edge provenance missing, unparseable, or out of bounds."""


@dataclass(frozen=True, order=True)
class Node:
    id: str
    node_type: NodeType

    def __post_init__(self):
        if not self.id:
            raise ValueError("node id must be non-empty")


@dataclass(frozen=True, order=True)
class Provenance:
    doc_id: str
    frequency: int
    runs: int

    @property
    def ratio(self) -> float:
        return self.frequency / self.runs


@dataclass(frozen=True)
class Edge:
    subject_id: str
    relation: RelationType
    object_id: str
    confidence: float
    provenance: tuple[Provenance, ...]

    def key(self) -> tuple[str, str, str]:
        return (self.subject_id, self.relation.value, self.object_id)


@dataclass
class KnowledgeGraph:
    nodes: set[Node] = field(default_factory=set)
    edges: dict[tuple[str, str, str], Edge] = field(default_factory=dict)
    # labels that exist under more than one node type; informational only
    diagnostics: list[str] = field(default_factory=list, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)


def merge(voted_batches: Sequence[Sequence[VotedTriple]]) -> KnowledgeGraph:
    """Merge per-document voted triples into one graph.

    Duplicate (s, r, o) across documents become one edge with appended
    provenance; per document only the strongest (frequency, runs) entry
    is kept, which makes merge idempotent and order-insensitive.
    """
    per_edge: dict[tuple[str, RelationType, str], dict[str, Provenance]] = {}
    for batch in voted_batches:
        for v in batch:
            key = (v.subject, v.relation, v.object)
            per_doc = per_edge.setdefault(key, {})
            candidate = Provenance(v.doc_id, v.frequency, v.runs)
            existing = per_doc.get(v.doc_id)
            if existing is None or (candidate.ratio, candidate.frequency, candidate.runs) > (
                existing.ratio,
                existing.frequency,
                existing.runs,
            ):
                per_doc[v.doc_id] = candidate

    kg = KnowledgeGraph()
    labels_by_type: dict[str, set[NodeType]] = {}
    for (subject, relation, obj), per_doc in per_edge.items():
        provenance = tuple(sorted(per_doc.values()))
        edge = Edge(
            subject_id=subject,
            relation=relation,
            object_id=obj,
            confidence=max(p.ratio for p in provenance),
            provenance=provenance,
        )
        kg.edges[edge.key()] = edge
        for node in (Node(subject, NodeType.DRUG), Node(obj, expected_object_type(relation))):
            kg.nodes.add(node)
            labels_by_type.setdefault(node.id, set()).add(node.node_type)

    for label in sorted(labels_by_type):
        types = labels_by_type[label]
        if len(types) > 1:
            names = ", ".join(sorted(t.value for t in types))
            kg.diagnostics.append(f"label {label!r} exists under multiple types: {names}")
    return kg


KG_CSV_HEADER = ["subject", "relation", "object", "confidence", "provenance"]


def export_csv(kg: KnowledgeGraph, path: Path) -> None:
    """Write the graph to CSV, rows sorted by (subject, relation, object).

    Deterministic: identical graphs produce byte-identical files.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(KG_CSV_HEADER)
        for key in sorted(kg.edges):
            edge = kg.edges[key]
            prov = ";".join(f"{p.doc_id}:{p.frequency}/{p.runs}" for p in edge.provenance)
            writer.writerow([edge.subject_id, edge.relation.value, edge.object_id, repr(edge.confidence), prov])


def _parse_provenance(text: str) -> tuple[Provenance, ...]:
    if not text:
        raise DanglingProvenance("empty provenance")
    entries = []
    for part in text.split(";"):
        doc_id, sep, ratio = part.rpartition(":")
        if not sep or "/" not in ratio:
            raise DanglingProvenance(f"unparseable provenance entry: {part!r}")
        freq_s, _, runs_s = ratio.partition("/")
        try:
            freq, runs = int(freq_s), int(runs_s)
        except ValueError:
            raise DanglingProvenance(f"unparseable provenance entry: {part!r}") from None
        if not doc_id or freq < 1 or runs < 1 or freq > runs:
            raise DanglingProvenance(f"provenance out of bounds: {part!r}")
        entries.append(Provenance(doc_id, freq, runs))
    return tuple(sorted(entries))


def import_csv(path: Path) -> KnowledgeGraph:
    """Load a graph from CSV; inverse of export_csv.

    Labels are re-normalized on load (a no-op for files this tool wrote),
    node types are implied by the relations, and the confidence column
    must agree with the provenance maximum.
    """
    batches: dict[tuple[str, RelationType, str], tuple[Provenance, ...]] = {}
    confidences: dict[tuple[str, RelationType, str], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != KG_CSV_HEADER:
            raise MalformedRow(f"unexpected header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(KG_CSV_HEADER):
                raise MalformedRow(f"line {lineno}: expected {len(KG_CSV_HEADER)} columns, got {len(row)}")
            subject_raw, relation_raw, object_raw, confidence_raw, prov_raw = row
            try:
                relation = validate_relation(relation_raw)
            except UnknownRelation as exc:
                raise SchemaViolation(f"line {lineno}: {exc}") from None
            try:
                subject = normalize_text(subject_raw)
                obj = normalize_text(object_raw)
            except EmptyAfterNormalization as exc:
                raise MalformedRow(f"line {lineno}: {exc}") from None
            provenance = _parse_provenance(prov_raw)
            try:
                confidence = float(confidence_raw)
            except ValueError:
                raise MalformedRow(f"line {lineno}: bad confidence {confidence_raw!r}") from None
            if abs(confidence - max(p.ratio for p in provenance)) > 1e-9:
                raise DanglingProvenance(
                    f"line {lineno}: confidence {confidence_raw} does not match provenance maximum"
                )
            key = (subject, relation, obj)
            if key in batches:
                raise MalformedRow(f"line {lineno}: duplicate edge {key}")
            batches[key] = provenance
            confidences[key] = confidence

    kg = KnowledgeGraph()
    labels_by_type: dict[str, set[NodeType]] = {}
    for (subject, relation, obj), provenance in batches.items():
        edge = Edge(subject, relation, obj, confidences[(subject, relation, obj)], provenance)
        kg.edges[edge.key()] = edge
        for node in (Node(subject, NodeType.DRUG), Node(obj, expected_object_type(relation))):
            kg.nodes.add(node)
            labels_by_type.setdefault(node.id, set()).add(node.node_type)
    for label in sorted(labels_by_type):
        types = labels_by_type[label]
        if len(types) > 1:
            names = ", ".join(sorted(t.value for t in types))
            kg.diagnostics.append(f"label {label!r} exists under multiple types: {names}")
    return kg


def stats(kg: KnowledgeGraph) -> dict:
    """Exact node/edge counts, per type and per relation (zeros included)."""
    nodes_per_type = {t.value: 0 for t in NodeType}
    for node in kg.nodes:
        nodes_per_type[node.node_type.value] += 1
    edges_per_relation = {r.value: 0 for r in RelationType}
    for edge in kg.edges.values():
        edges_per_relation[edge.relation.value] += 1
    return {
        "node_count": len(kg.nodes),
        "edge_count": len(kg.edges),
        "nodes_per_type": nodes_per_type,
        "edges_per_relation": edges_per_relation,
    }
