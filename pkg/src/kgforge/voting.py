"""Majority voting over repeated LLM generations.

Raw triples from all generations of one document are normalized, counted
per generation, scored as confidence = frequency / runs, and filtered at
the majority threshold (default 0.5, inclusive).
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .schema import RelationType, UnknownRelation, validate_relation

_WS_RUN = re.compile(r"\s+")
_QUOTES = "\"'`“”‘’«»"


class EmptyAfterNormalization(ValueError):
    """Text field normalized down to the empty string."""


@dataclass(frozen=True, order=True)
class VotedTriple:
    subject: str
    relation: RelationType
    object: str
    frequency: int
    runs: int
    confidence: float
    doc_id: str

    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.relation.value, self.object)


@dataclass(frozen=True)
class VoteReject:
    """Triple excluded from voting, kept for the audit trail."""

    doc_id: str
    generation_index: int
    subject: str
    relation: str
    object: str
    reason: str


def normalize_text(s: str) -> str:
    """Canonical surface form: NFC, lowercase, collapsed whitespace, no
    surrounding quotes.

    Raises EmptyAfterNormalization when nothing survives.
    """
    out = unicodedata.normalize("NFC", s).lower()
    out = _WS_RUN.sub(" ", out)
    prev = None
    while out != prev:
        prev = out
        out = out.strip().strip(_QUOTES)
    if not out:
        raise EmptyAfterNormalization(f"empty after normalization: {s!r}")
    return out


def count_votes(triples: Sequence, runs: int, normalize_after_vote: bool = False) -> list[VotedTriple]:
    """Count per-document triple frequencies across generations.

    Triples are normalized first, deduplicated within each generation
    (a triple repeated inside one generation counts once), and frequency
    is the number of distinct generations containing the normalized
    triple. With normalize_after_vote=True the counting happens on the
    raw surface forms and normalization is applied to the survivors,
    merging equal normalized triples by max frequency.

    All triples must share one doc_id and carry relations that pass
    validate_relation; violations raise (callers split rejects out with
    vote_generations first).
    """
    if not triples:
        return []
    doc_ids = {t.doc_id for t in triples}
    if len(doc_ids) != 1:
        raise ValueError(f"count_votes expects a single document, got {sorted(doc_ids)}")
    doc_id = doc_ids.pop()
    if runs < 1:
        raise ValueError("runs must be >= 1")

    per_generation: dict[int, set[tuple[str, RelationType, str]]] = {}
    for t in triples:
        rel = validate_relation(t.relation)
        if normalize_after_vote:
            key = (t.subject.strip(), rel, t.object.strip())
        else:
            key = (normalize_text(t.subject), rel, normalize_text(t.object))
        per_generation.setdefault(t.generation_index, set()).add(key)

    counts: dict[tuple[str, RelationType, str], int] = {}
    for gen_keys in per_generation.values():
        for key in gen_keys:
            counts[key] = counts.get(key, 0) + 1

    if normalize_after_vote:
        merged: dict[tuple[str, RelationType, str], int] = {}
        for (subj, rel, obj), freq in counts.items():
            norm_key = (normalize_text(subj), rel, normalize_text(obj))
            merged[norm_key] = max(merged.get(norm_key, 0), freq)
        counts = merged

    voted = [
        VotedTriple(
            subject=subj,
            relation=rel,
            object=obj,
            frequency=freq,
            runs=runs,
            confidence=freq / runs,
            doc_id=doc_id,
        )
        for (subj, rel, obj), freq in counts.items()
    ]
    voted.sort(key=lambda v: v.key())
    return voted


def filter_by_confidence(voted: Iterable[VotedTriple], threshold: float = 0.5) -> list[VotedTriple]:
    """Keep triples with confidence >= threshold, sorted by (s, r, o)."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    kept = [v for v in voted if v.confidence >= threshold]
    kept.sort(key=lambda v: v.key())
    return kept


def vote_generations(
    raw_triples: Sequence, runs: int, normalize_after_vote: bool = False
) -> tuple[list[VotedTriple], list[VoteReject]]:
    """Split raw triples into votable ones and rejects, then count votes.

    Unknown relations and fields that normalize to nothing are recorded
    as rejects instead of votes.
    """
    votable = []
    rejects = []
    for t in raw_triples:
        try:
            validate_relation(t.relation)
            normalize_text(t.subject)
            normalize_text(t.object)
        except UnknownRelation:
            rejects.append(
                VoteReject(t.doc_id, t.generation_index, t.subject, t.relation, t.object, "unknown_relation")
            )
            continue
        except EmptyAfterNormalization:
            rejects.append(
                VoteReject(t.doc_id, t.generation_index, t.subject, t.relation, t.object, "empty_after_normalization")
            )
            continue
        votable.append(t)
    return count_votes(votable, runs, normalize_after_vote=normalize_after_vote), rejects


VOTED_CSV_HEADER = ["doc_id", "subject", "relation", "object", "frequency", "runs", "confidence"]


def write_voted_csv(path: Path, voted: Iterable[VotedTriple]) -> None:
    rows = sorted(voted, key=lambda v: (v.doc_id,) + v.key())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VOTED_CSV_HEADER)
        for v in rows:
            writer.writerow(
                [v.doc_id, v.subject, v.relation.value, v.object, v.frequency, v.runs, repr(v.confidence)]
            )


def read_voted_csv(path: Path) -> list[VotedTriple]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                VotedTriple(
                    subject=row["subject"],
                    relation=validate_relation(row["relation"]),
                    object=row["object"],
                    frequency=int(row["frequency"]),
                    runs=int(row["runs"]),
                    confidence=float(row["confidence"]),
                    doc_id=row["doc_id"],
                )
            )
    return out
