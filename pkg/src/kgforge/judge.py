"""LLM-as-a-judge: label every extracted triple against its leaflet.

One judging pass per document. The judge sees the leaflet text, the
numbered triples, label definitions, and one worked example per label,
and must answer one `index | label | justification` line per triple.
Unparseable or missing lines get a single retry, then stay missing
rather than guessed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .evaluation import EvalReport, Label, Source, Verdict, aggregate, write_verdicts_csv
from .gateway import ContextOverflow, InsufficientGenerations, LlmClient, LlmUnavailable
from .voting import VotedTriple, read_voted_csv

log = logging.getLogger(__name__)

DEFAULT_LABEL_DEFINITIONS = (
    "- correct: the triple is fully supported by the leaflet (true positive).\n"
    "- incorrect: the triple is not supported by the leaflet (false positive).\n"
    "- partially_correct: the triple is related to the leaflet content but imprecise or incomplete."
)

# one worked example per label, kept in sync with the shipped template
DEFAULT_JUDGE_EXAMPLES = (
    (
        ("zitrease allergy", "hassideeffect", "somnolence"),
        Label.CORRECT,
        "somnolence is a common side effect",
    ),
    (
        ("oxynorm", "hascolor", "blue"),
        Label.INCORRECT,
        "the leaflet does not describe a blue color",
    ),
    (
        ("oxynorm", "hasinactiveingredient", "iron"),
        Label.PARTIALLY_CORRECT,
        "the leaflet lists iron oxide as an excipient rather than iron",
    ),
)

LEAFLET_PLACEHOLDER = "{{LEAFLET_TEXT}}"
TRIPLES_PLACEHOLDER = "{{TRIPLES}}"
EXAMPLES_PLACEHOLDER = "{{EXAMPLES}}"


@dataclass(frozen=True)
class JudgePrompt:
    leaflet_text: str
    triples: tuple
    label_definitions: str = DEFAULT_LABEL_DEFINITIONS
    in_context_examples: tuple = DEFAULT_JUDGE_EXAMPLES
    skeleton: str = ""  # template file text; shipped default when empty

    def __post_init__(self):
        covered = {label for _, label, _ in self.in_context_examples}
        if covered != set(Label):
            missing = ", ".join(sorted(label.value for label in set(Label) - covered))
            raise ValueError(f"judge examples must cover all three labels; missing: {missing}")

    def render(self) -> str:
        skeleton = self.skeleton or default_judge_skeleton()
        examples = "\n".join(
            f"{s} | {r} | {o} -> {label.value} | {why}"
            for (s, r, o), label, why in self.in_context_examples
        )
        triples = "\n".join(
            f"{i}. {t.subject} | {t.relation.value} | {t.object}" for i, t in enumerate(self.triples, start=1)
        )
        return (
            skeleton.replace(EXAMPLES_PLACEHOLDER, examples)
            .replace(LEAFLET_PLACEHOLDER, self.leaflet_text)
            .replace(TRIPLES_PLACEHOLDER, triples)
        )


def default_judge_skeleton() -> str:
    return resources.files("kgforge.templates").joinpath("judge.txt").read_text(encoding="utf-8")


def load_judge_skeleton(path: Path) -> str:
    text = Path(path).read_text(encoding="utf-8")
    for placeholder in (LEAFLET_PLACEHOLDER, TRIPLES_PLACEHOLDER, EXAMPLES_PLACEHOLDER):
        if placeholder not in text:
            raise ValueError(f"judge template {path} is missing the {placeholder} placeholder")
    return text


_LABEL_ALIASES = {
    "correct": Label.CORRECT,
    "correct (true positive)": Label.CORRECT,
    "incorrect": Label.INCORRECT,
    "incorrect (false positive)": Label.INCORRECT,
    "partially_correct": Label.PARTIALLY_CORRECT,
    "partially correct": Label.PARTIALLY_CORRECT,
    "partially correct (incomplete)": Label.PARTIALLY_CORRECT,
}


def _parse_label(raw: str) -> Optional[Label]:
    return _LABEL_ALIASES.get(raw.strip().lower())


def parse_judge_response(
    raw_text: str, triples: Sequence[VotedTriple], doc_id: str
) -> tuple[dict[int, Verdict], list[str]]:
    """Map `index | label | justification` lines to verdicts by triple index.

    Returns (verdicts keyed by 1-based index, diagnostic notes for lines
    that could not be used)."""
    verdicts: dict[int, Verdict] = {}
    notes: list[str] = []
    for line in raw_text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split("|", 2)
        if len(parts) < 2:
            notes.append(f"unparseable line: {stripped!r}")
            continue
        try:
            index = int(parts[0].strip().rstrip("."))
        except ValueError:
            notes.append(f"bad index in line: {stripped!r}")
            continue
        label = _parse_label(parts[1])
        if label is None:
            notes.append(f"unknown label in line: {stripped!r}")
            continue
        if not 1 <= index <= len(triples):
            notes.append(f"index {index} out of range 1..{len(triples)}")
            continue
        if index in verdicts:
            notes.append(f"duplicate answer for index {index}; keeping the first")
            continue
        triple = triples[index - 1]
        verdicts[index] = Verdict(
            triple_key=(triple.subject, triple.relation.value, triple.object, doc_id),
            label=label,
            justification=parts[2].strip() if len(parts) > 2 else "",
            source=Source.LLM_JUDGE,
        )
    return verdicts, notes


@dataclass
class JudgeDocumentResult:
    doc_id: str
    verdicts: list
    missing: list  # triple keys the judge never answered for
    notes: list


def judge_document(
    doc,
    triples: Sequence[VotedTriple],
    client: LlmClient,
    skeleton: str = "",
    examples: tuple = DEFAULT_JUDGE_EXAMPLES,
) -> JudgeDocumentResult:
    """Judge all triples of one document in a single pass plus one retry."""
    if not triples:
        return JudgeDocumentResult(doc_id=doc.doc_id, verdicts=[], missing=[], notes=[])
    for t in triples:
        if t.doc_id != doc.doc_id:
            raise ValueError(f"triple {t.key()} does not belong to document {doc.doc_id}")
    prompt = JudgePrompt(
        leaflet_text=doc.text,
        triples=tuple(triples),
        in_context_examples=examples,
        skeleton=skeleton,
    ).render()

    generation = client.complete(prompt, doc.doc_id, 0)
    verdicts, notes = parse_judge_response(generation.raw_text, triples, doc.doc_id)
    if len(verdicts) < len(triples):
        try:
            retry = client.complete(prompt, doc.doc_id, 1)
        except (LlmUnavailable, ContextOverflow) as exc:
            notes.append(f"retry unavailable: {exc}")
        else:
            more, retry_notes = parse_judge_response(retry.raw_text, triples, doc.doc_id)
            notes.extend(retry_notes)
            for index, verdict in more.items():
                verdicts.setdefault(index, verdict)
    missing = [
        (t.subject, t.relation.value, t.object, doc.doc_id)
        for i, t in enumerate(triples, start=1)
        if i not in verdicts
    ]
    ordered = [verdicts[i] for i in sorted(verdicts)]
    return JudgeDocumentResult(doc_id=doc.doc_id, verdicts=ordered, missing=missing, notes=notes)


@dataclass
class JudgeRunSummary:
    verdicts: list
    report: Optional[EvalReport]
    missing: list
    failed_docs: list
    total_docs: int
    error: Optional[str] = None

    @property
    def completion(self) -> float:
        judged = self.total_docs - len(self.failed_docs)
        return judged / self.total_docs if self.total_docs else 0.0


def judge_corpus(run_dir: Path, corpus, client: LlmClient, skeleton: str = "") -> JudgeRunSummary:
    """Judge every document of a run and aggregate the verdicts.

    Per-document failures are reported and skipped; the report covers the
    completed verdicts with the completion rate noted. Results persist as
    judge_verdicts.csv and judge_report.json in the run directory.
    """
    run_dir = Path(run_dir)
    voted = read_voted_csv(run_dir / "voted.csv")
    by_doc: dict[str, list[VotedTriple]] = {}
    for v in voted:
        by_doc.setdefault(v.doc_id, []).append(v)

    if not voted:
        summary = JudgeRunSummary(
            verdicts=[], report=None, missing=[], failed_docs=[], total_docs=0, error="zero triples to judge"
        )
        _persist(run_dir, summary)
        return summary

    all_verdicts: list[Verdict] = []
    all_missing: list = []
    failed: list[str] = []
    for doc_id in sorted(by_doc):
        record = corpus.records.get(doc_id)
        if record is None or record.status == "failed":
            failed.append(doc_id)
            log.warning("no usable document for %s; skipping", doc_id)
            continue
        corpus.read_text(record)
        try:
            result = judge_document(record, by_doc[doc_id], client, skeleton=skeleton)
        except (LlmUnavailable, ContextOverflow, InsufficientGenerations) as exc:
            failed.append(doc_id)
            log.warning("judging failed for %s: %s", doc_id, exc)
            continue
        all_verdicts.extend(result.verdicts)
        all_missing.extend(result.missing)

    report = aggregate(all_verdicts) if all_verdicts else None
    summary = JudgeRunSummary(
        verdicts=all_verdicts,
        report=report,
        missing=all_missing,
        failed_docs=failed,
        total_docs=len(by_doc),
        error=None if all_verdicts else "no verdicts produced",
    )
    _persist(run_dir, summary)
    return summary


def _persist(run_dir: Path, summary: JudgeRunSummary) -> None:
    write_verdicts_csv(run_dir / "judge_verdicts.csv", summary.verdicts)
    payload = {
        "total": summary.report.total if summary.report else 0,
        "counts": {label.value: summary.report.counts[label] for label in Label} if summary.report else {},
        "percentages": {label.value: summary.report.percentages[label] for label in Label}
        if summary.report
        else {},
        "completion": summary.completion,
        "missing_verdicts": len(summary.missing),
        "failed_docs": summary.failed_docs,
        "error": summary.error,
    }
    (run_dir / "judge_report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
