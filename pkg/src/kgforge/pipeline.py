"""Run-directory management and the extract/vote/build stages.

Every stage reads only upstream artifacts and rewrites its own outputs
deterministically, so re-running a stage without input changes is a
no-op on content and stages are individually resumable.
"""

from __future__ import annotations

import json
import logging
import secrets
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .extraction import ExtractionResult, PromptTemplate, RawTriple, extract_document
from .gateway import (
    ContextOverflow,
    InsufficientGenerations,
    LlmClient,
    read_generations_jsonl,
    write_generations_jsonl,
)
from .ingest import Corpus
from .kgstore import KnowledgeGraph, export_csv, merge
from .voting import filter_by_confidence, read_voted_csv, vote_generations, write_voted_csv

log = logging.getLogger(__name__)


def new_run_id() -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return f"{stamp}-{secrets.token_hex(2)}"


class RunPaths:
    def __init__(self, runs_dir: Path, run_id: str):
        self.run_id = run_id
        self.root = Path(runs_dir) / run_id
        self.generations = self.root / "generations.jsonl"
        self.triples = self.root / "triples.jsonl"
        self.rejects = self.root / "rejects.jsonl"
        self.vote_rejects = self.root / "vote_rejects.jsonl"
        self.documents = self.root / "documents.jsonl"
        self.voted = self.root / "voted.csv"
        self.kg = self.root / "kg.csv"

    def ensure(self) -> "RunPaths":
        self.root.mkdir(parents=True, exist_ok=True)
        return self


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def extract_stage(
    corpus: Corpus,
    paths: RunPaths,
    template: PromptTemplate,
    client: LlmClient,
    jobs: int = 4,
) -> dict:
    """Run N generations per parsed document and persist everything.

    Documents already present in the run's documents.jsonl are left
    alone, which makes the stage resumable; new documents are merged into
    the run files, which are rewritten sorted by doc id.
    """
    paths.ensure()
    done = {entry["doc_id"]: entry for entry in _read_jsonl(paths.documents)}
    todo = [
        corpus.records[doc_id]
        for doc_id in sorted(corpus.records)
        if corpus.records[doc_id].status in ("parsed", "extraction_done") and doc_id not in done
    ]
    for record in todo:
        corpus.read_text(record)

    def run_one(record):
        try:
            return extract_document(record, template, client)
        except (InsufficientGenerations, ContextOverflow) as exc:
            record.fail(str(exc))
            return exc

    results: dict[str, object] = {}
    if todo:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            for record, outcome in zip(todo, pool.map(run_one, todo)):
                results[record.doc_id] = outcome

    generations = []
    triples = [t for t in map(_triple_from_json, _read_jsonl(paths.triples)) if t.doc_id in done]
    rejects = [r for r in _read_jsonl(paths.rejects) if r["doc_id"] in done]
    if paths.generations.exists():
        generations = [g for g in read_generations_jsonl(paths.generations) if g.doc_id in done]

    for doc_id in sorted(results):
        outcome = results[doc_id]
        if isinstance(outcome, ExtractionResult):
            generations.extend(outcome.generations)
            triples.extend(outcome.triples)
            rejects.extend(
                {
                    "doc_id": r.doc_id,
                    "generation_index": r.generation_index,
                    "line": r.line,
                    "reason": r.reason,
                }
                for r in outcome.rejects
            )
            done[doc_id] = {
                "doc_id": doc_id,
                "runs": len(outcome.generations),
                "requested": client.cfg.num_generations,
                "empty_generations": outcome.empty_generation_indices,
                "status": "ok",
            }
        else:
            done[doc_id] = {
                "doc_id": doc_id,
                "runs": 0,
                "requested": client.cfg.num_generations,
                "empty_generations": [],
                "status": "failed",
                "error": str(outcome),
            }

    write_generations_jsonl(paths.generations, generations)
    _write_jsonl(
        paths.triples,
        [
            {
                "doc_id": t.doc_id,
                "generation_index": t.generation_index,
                "subject": t.subject,
                "relation": t.relation,
                "object": t.object,
            }
            for t in sorted(triples, key=lambda t: (t.doc_id, t.generation_index, t.subject, t.relation, t.object))
        ],
    )
    _write_jsonl(paths.rejects, sorted(rejects, key=lambda r: (r["doc_id"], r["generation_index"], r["line"])))
    _write_jsonl(paths.documents, [done[doc_id] for doc_id in sorted(done)])
    corpus.save()
    extracted = sum(1 for entry in done.values() if entry["status"] == "ok")
    failed = len(done) - extracted
    return {"documents": len(done), "extracted": extracted, "failed": failed, "triples": len(triples)}


def _triple_from_json(data: dict) -> RawTriple:
    return RawTriple(
        subject=data["subject"],
        relation=data["relation"],
        object=data["object"],
        doc_id=data["doc_id"],
        generation_index=int(data["generation_index"]),
    )


def vote_stage(paths: RunPaths, threshold: float = 0.5, normalize_after_vote: bool = False) -> dict:
    """Normalize, count, and filter the run's raw triples into voted.csv."""
    raw = [_triple_from_json(row) for row in _read_jsonl(paths.triples)]
    doc_meta = {entry["doc_id"]: entry for entry in _read_jsonl(paths.documents)}
    by_doc: dict[str, list[RawTriple]] = {}
    for t in raw:
        by_doc.setdefault(t.doc_id, []).append(t)

    kept_all = []
    reject_rows = []
    for doc_id in sorted(by_doc):
        meta = doc_meta.get(doc_id)
        if meta is None or meta.get("status") != "ok" or not meta.get("runs"):
            log.warning("skipping %s: no usable generation metadata", doc_id)
            continue
        voted, rejects = vote_generations(by_doc[doc_id], meta["runs"], normalize_after_vote)
        kept = filter_by_confidence(voted, threshold)
        dropped = [v for v in voted if v not in kept]
        kept_all.extend(kept)
        reject_rows.extend(
            {
                "doc_id": r.doc_id,
                "generation_index": r.generation_index,
                "subject": r.subject,
                "relation": r.relation,
                "object": r.object,
                "reason": r.reason,
            }
            for r in rejects
        )
        reject_rows.extend(
            {
                "doc_id": v.doc_id,
                "subject": v.subject,
                "relation": v.relation.value,
                "object": v.object,
                "frequency": v.frequency,
                "runs": v.runs,
                "confidence": v.confidence,
                "reason": "below_threshold",
            }
            for v in dropped
        )

    write_voted_csv(paths.voted, kept_all)
    _write_jsonl(
        paths.vote_rejects,
        sorted(reject_rows, key=lambda r: (r["doc_id"], r.get("subject", ""), r.get("object", ""), r["reason"])),
    )
    return {"voted": len(kept_all), "rejected": len(reject_rows)}


def build_stage(paths: RunPaths, out_path: Optional[Path] = None) -> tuple[KnowledgeGraph, Path]:
    """Merge the run's voted triples into a graph and export it."""
    voted = read_voted_csv(paths.voted)
    by_doc: dict[str, list] = {}
    for v in voted:
        by_doc.setdefault(v.doc_id, []).append(v)
    kg = merge([by_doc[doc_id] for doc_id in sorted(by_doc)])
    for note in kg.diagnostics:
        log.info("merge diagnostic: %s", note)
    target = Path(out_path) if out_path else paths.kg
    target.parent.mkdir(parents=True, exist_ok=True)
    export_csv(kg, target)
    return kg, target
