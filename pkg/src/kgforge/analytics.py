"""Descriptive analyses over a built graph.

Covers entity/relation distributions, per-type degree histograms,
Jaccard similarity of drug neighbor sets, greedy leader clustering of
drugs, and the coverage feature row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .kgstore import KnowledgeGraph, stats
from .schema import NodeType, RelationType


@dataclass(frozen=True)
class DegreeHistogram:
    node_type: NodeType
    buckets: dict  # degree -> number of nodes with that degree

    def total(self) -> int:
        return sum(self.buckets.values())


@dataclass
class DrugCluster:
    representative: str
    members: set[str]


COVERAGE_FEATURES = {
    "warnings": (RelationType.HAS_WARNING,),
    "contraindications": (RelationType.HAS_CONTRAINDICATION,),
    "side_effects": (RelationType.HAS_SIDE_EFFECT,),
    "active_ingredients": (RelationType.HAS_ACTIVE_INGREDIENT,),
    "inactive_ingredients": (RelationType.HAS_INACTIVE_INGREDIENT,),
    "dosage": (RelationType.HAS_DOSAGE_INFO,),
    "storage": (RelationType.HAS_STORAGE_INFO,),
    "physical_attributes": (RelationType.HAS_COLOR, RelationType.HAS_SHAPE),
}


def entity_relation_distribution(kg: KnowledgeGraph) -> tuple[dict, dict]:
    """Per-type node counts and per-relation edge counts."""
    s = stats(kg)
    return s["nodes_per_type"], s["edges_per_relation"]


def degree_distribution(kg: KnowledgeGraph, node_type: NodeType) -> DegreeHistogram:
    """Histogram of node degrees for one type.

    Degree counts distinct incident edges regardless of direction, so the
    histogram mass equals the number of nodes of that type.
    """
    degrees = {node.id: 0 for node in kg.nodes if node.node_type is node_type}
    for edge in kg.edges.values():
        if node_type is NodeType.DRUG and edge.subject_id in degrees:
            degrees[edge.subject_id] += 1
        if edge.relation.object_type is node_type and edge.object_id in degrees:
            degrees[edge.object_id] += 1
    buckets: dict[int, int] = {}
    for d in degrees.values():
        buckets[d] = buckets.get(d, 0) + 1
    return DegreeHistogram(node_type=node_type, buckets=buckets)


def jaccard(drug_a_entities: set, drug_b_entities: set) -> float:
    """|A n B| / |A u B|, with 0.0 for two empty sets."""
    if not drug_a_entities and not drug_b_entities:
        return 0.0
    union = drug_a_entities | drug_b_entities
    return len(drug_a_entities & drug_b_entities) / len(union)


def drug_entity_sets(
    kg: KnowledgeGraph, relations: Optional[Iterable[RelationType]] = None
) -> dict[str, set]:
    """Neighbor-identity set per drug, pooled over the given relations
    (all nine by default). Neighbor identity is (type, label) so the same
    label under two types stays distinct."""
    wanted = set(relations) if relations is not None else set(RelationType)
    sets: dict[str, set] = {node.id: set() for node in kg.nodes if node.node_type is NodeType.DRUG}
    for edge in kg.edges.values():
        if edge.relation in wanted and edge.subject_id in sets:
            sets[edge.subject_id].add((edge.relation.object_type.value, edge.object_id))
    return sets


def cluster_drugs(
    kg: KnowledgeGraph, tau: float = 0.5, relations: Optional[Iterable[RelationType]] = None
) -> list[DrugCluster]:
    """Greedy leader clustering of drug nodes.

    Drugs are visited in descending degree order (ties lexicographic);
    each joins the first existing cluster whose representative is at
    least tau-similar, else founds a new cluster. Representatives are
    fixed at founding, so they are the max-degree (ties: smallest) member
    of their cluster.
    """
    if not 0 < tau <= 1:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    entity_sets = drug_entity_sets(kg, relations)
    # drugs only ever appear as subjects, so subject counting is the degree
    degree_of = {drug: 0 for drug in entity_sets}
    for edge in kg.edges.values():
        if edge.subject_id in degree_of:
            degree_of[edge.subject_id] += 1
    order = sorted(entity_sets, key=lambda d: (-degree_of[d], d))

    clusters: list[DrugCluster] = []
    for drug in order:
        for cluster in clusters:
            if jaccard(entity_sets[drug], entity_sets[cluster.representative]) >= tau:
                cluster.members.add(drug)
                break
        else:
            clusters.append(DrugCluster(representative=drug, members={drug}))
    return clusters


def coverage_row(kg: KnowledgeGraph) -> dict[str, str]:
    """Feature presence row: "yes" iff at least one edge of the relation
    (or either physical-attribute relation) exists."""
    present = {edge.relation for edge in kg.edges.values()}
    return {
        feature: ("yes" if any(r in present for r in rels) else "no")
        for feature, rels in COVERAGE_FEATURES.items()
    }


def write_analytics(kg: KnowledgeGraph, out_dir: Path, tau: float = 0.5) -> None:
    """Emit the full analytics table set under out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes_per_type, edges_per_relation = entity_relation_distribution(kg)
    with open(out_dir / "distribution.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "name", "count"])
        for name, count in nodes_per_type.items():
            writer.writerow(["node_type", name, count])
        for name, count in edges_per_relation.items():
            writer.writerow(["relation", name, count])

    for node_type in (NodeType.DRUG, NodeType.SIDE_EFFECT, NodeType.CONTRAINDICATION):
        hist = degree_distribution(kg, node_type)
        with open(out_dir / f"degree_{node_type.value}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["degree", "count"])
            for degree in sorted(hist.buckets):
                writer.writerow([degree, hist.buckets[degree]])

    clusters = cluster_drugs(kg, tau=tau)
    with open(out_dir / "clusters.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cluster", "representative", "member"])
        for idx, cluster in enumerate(clusters):
            for member in sorted(cluster.members):
                writer.writerow([idx, cluster.representative, member])

    with open(out_dir / "coverage.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "present"])
        for feature, value in coverage_row(kg).items():
            writer.writerow([feature, value])
