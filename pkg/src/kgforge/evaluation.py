"""Verdict aggregation, recall from false-negative audits, and Wilson
confidence intervals for sample proportions."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

Z_95 = 1.959964

TripleKey = tuple[str, str, str, str]  # subject, relation, object, doc_id


class Label(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    PARTIALLY_CORRECT = "partially_correct"

    def __str__(self) -> str:
        return self.value


LABEL_DISPLAY = {
    Label.CORRECT: "Correct (True Positive)",
    Label.INCORRECT: "Incorrect (False Positive)",
    Label.PARTIALLY_CORRECT: "Partially Correct (Incomplete)",
}


class Source(enum.Enum):
    HUMAN = "human"
    LLM_JUDGE = "llm_judge"


class DuplicateVerdict(ValueError):
    """Two verdicts for the same triple from the same source."""


@dataclass(frozen=True)
class Verdict:
    triple_key: TripleKey
    label: Label
    justification: str
    source: Source


@dataclass(frozen=True)
class EvalReport:
    counts: dict
    percentages: dict  # raw values; round only when displaying
    total: int
    recall: Optional[float] = None


@dataclass(frozen=True)
class FalseNegativeAudit:
    doc_ids: tuple[str, ...]
    gold_relation_count: int
    false_negatives: int

    def __post_init__(self):
        if self.gold_relation_count < 1:
            raise ValueError("gold_relation_count must be positive")
        if not 0 <= self.false_negatives <= self.gold_relation_count:
            raise ValueError("false_negatives must be in [0, gold_relation_count]")


def aggregate(verdicts: Sequence[Verdict]) -> EvalReport:
    """Count verdicts per label and derive raw percentages."""
    if not verdicts:
        raise ValueError("aggregate requires at least one verdict")
    seen: set[tuple[TripleKey, Source]] = set()
    counts = {label: 0 for label in Label}
    for v in verdicts:
        key = (v.triple_key, v.source)
        if key in seen:
            raise DuplicateVerdict(f"duplicate verdict for {v.triple_key} from {v.source.value}")
        seen.add(key)
        counts[v.label] += 1
    total = len(verdicts)
    percentages = {label: counts[label] / total * 100 for label in Label}
    return EvalReport(counts=counts, percentages=percentages, total=total)


def aggregate_counts(counts: dict) -> EvalReport:
    """aggregate() for pre-tallied label counts."""
    full = {label: int(counts.get(label, counts.get(label.value, 0))) for label in Label}
    total = sum(full.values())
    if total < 1:
        raise ValueError("aggregate requires at least one verdict")
    percentages = {label: full[label] / total * 100 for label in Label}
    return EvalReport(counts=full, percentages=percentages, total=total)


def recall(audit: FalseNegativeAudit) -> float:
    """Share of gold relations that made it into the graph."""
    return (audit.gold_relation_count - audit.false_negatives) / audit.gold_relation_count


def proportion_ci(successes: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval, clamped to [0, 1].

    Chosen over Wald for stable behavior at proportions near 0 and 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= successes <= n:
        raise ValueError("successes must be in [0, n]")
    p_hat = successes / n
    denom = 1 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n))
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return (low, high)


def distribution_alignment(sample_counts: dict, full_counts: dict) -> dict:
    """Per-relation check that the full-dataset proportion falls inside
    the sample proportion's 95% CI."""
    sample_total = sum(sample_counts.values())
    full_total = sum(full_counts.values())
    if sample_total < 1 or full_total < 1:
        raise ValueError("both count maps must have positive totals")
    result = {}
    for relation in sorted(set(sample_counts) | set(full_counts)):
        s = sample_counts.get(relation, 0)
        f = full_counts.get(relation, 0)
        sample_p = s / sample_total
        full_p = f / full_total
        ci = proportion_ci(s, sample_total)
        result[relation] = {
            "sample_p": sample_p,
            "full_p": full_p,
            "ci": ci,
            "aligned": ci[0] <= full_p <= ci[1],
        }
    return result


VERDICT_CSV_HEADER = ["subject", "relation", "object", "doc_id", "label", "justification", "source"]


def write_verdicts_csv(path: Path, verdicts: Iterable[Verdict]) -> None:
    rows = sorted(verdicts, key=lambda v: (v.source.value,) + v.triple_key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(VERDICT_CSV_HEADER)
        for v in rows:
            subject, relation, obj, doc_id = v.triple_key
            writer.writerow([subject, relation, obj, doc_id, v.label.value, v.justification, v.source.value])


def read_verdicts_csv(path: Path) -> list[Verdict]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                Verdict(
                    triple_key=(row["subject"], row["relation"], row["object"], row["doc_id"]),
                    label=Label(row["label"]),
                    justification=row.get("justification", ""),
                    source=Source(row["source"]),
                )
            )
    return out


def read_audit_json(path: Path) -> FalseNegativeAudit:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return FalseNegativeAudit(
        doc_ids=tuple(data.get("doc_ids", [])),
        gold_relation_count=int(data["gold_relation_count"]),
        false_negatives=int(data["false_negatives"]),
    )


def format_report(report: EvalReport, title: str = "Evaluation") -> str:
    """Render one report as a fixed-width text block (rounding happens
    here and only here)."""
    lines = [title, f"{'Category':<32}{'Count':>8}{'%':>8}"]
    for label in Label:
        lines.append(f"{LABEL_DISPLAY[label]:<32}{report.counts[label]:>8}{report.percentages[label]:>8.1f}")
    lines.append(f"{'Total':<32}{report.total:>8}{100.0:>8.1f}")
    if report.recall is not None:
        lines.append(f"{'Recall':<32}{'':>8}{report.recall * 100:>8.1f}")
    return "\n".join(lines)


def format_side_by_side(human: EvalReport, judge: EvalReport) -> str:
    """Human and judge columns next to each other."""
    lines = [
        f"{'Category':<32}{'Human count':>12}{'%':>8}{'LLM count':>12}{'%':>8}",
    ]
    for label in Label:
        lines.append(
            f"{LABEL_DISPLAY[label]:<32}"
            f"{human.counts[label]:>12}{human.percentages[label]:>8.1f}"
            f"{judge.counts[label]:>12}{judge.percentages[label]:>8.1f}"
        )
    lines.append(f"{'Total':<32}{human.total:>12}{100.0:>8.1f}{judge.total:>12}{100.0:>8.1f}")
    return "\n".join(lines)
