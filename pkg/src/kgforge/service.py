"""HTTP API for human annotation: serves triples with leaflet context,
persists verdicts append-only, and exposes live evaluation reports.

File-backed on purpose: a JSONL verdict log and a session manifest per
session keep the tool dependency-free at desk scale and make the verdict
log the single source of truth.
"""

from __future__ import annotations

import json
import random
import re
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .evaluation import Label, Source, Verdict, aggregate
from .ingest import Corpus
from .voting import read_voted_csv

EXCERPT_FALLBACK_CHARS = 400

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")


class SampleTooLarge(ValueError):
    """Requested sample exceeds the population."""


@dataclass
class AnnotationSession:
    session_id: str
    run_id: str
    annotator: str
    seed: int
    assigned: list  # ordered [subject, relation, object, doc_id] lists


def leaflet_excerpt(text: str, needle: str) -> str:
    """Sentence window around the first occurrence of the object string,
    else the start of the full text."""
    sentences = [s for s in _SENTENCE_SPLIT.split(text) if s and s.strip()]
    lowered = needle.lower()
    for i, sentence in enumerate(sentences):
        if lowered in sentence.lower():
            window = sentences[max(0, i - 1) : i + 2]
            return " ".join(s.strip() for s in window)
    return text[:EXCERPT_FALLBACK_CHARS]


class SessionStore:
    """Sessions and their append-only verdict logs under the runs dir."""

    def __init__(self, runs_dir: Path):
        self.runs_dir = Path(runs_dir)
        self._lock = threading.Lock()

    def _session_dir(self, run_id: str, session_id: str) -> Path:
        return self.runs_dir / run_id / "sessions" / session_id

    def create_session(
        self,
        run_id: str,
        annotator: str,
        n_leaflets: Optional[int] = None,
        n_triples: Optional[int] = None,
        seed: int = 0,
    ) -> AnnotationSession:
        """Uniform random sample without replacement, seed recorded.

        Leaflet-level sampling pulls every triple of each sampled
        leaflet; the assignment order is the randomized draw order.
        """
        voted_path = self.runs_dir / run_id / "voted.csv"
        if not voted_path.exists():
            raise FileNotFoundError(f"run {run_id} has no voted.csv")
        voted = read_voted_csv(voted_path)
        rng = random.Random(seed)
        if n_leaflets is not None:
            docs = sorted({v.doc_id for v in voted})
            if n_leaflets > len(docs):
                raise SampleTooLarge(f"asked for {n_leaflets} leaflets, corpus has {len(docs)}")
            chosen = rng.sample(docs, n_leaflets)
            by_doc: dict[str, list] = {}
            for v in voted:
                by_doc.setdefault(v.doc_id, []).append(v)
            assigned = [
                [v.subject, v.relation.value, v.object, v.doc_id]
                for doc_id in chosen
                for v in sorted(by_doc[doc_id], key=lambda t: t.key())
            ]
        elif n_triples is not None:
            population = sorted(voted, key=lambda v: (v.doc_id,) + v.key())
            if n_triples > len(population):
                raise SampleTooLarge(f"asked for {n_triples} triples, run has {len(population)}")
            assigned = [
                [v.subject, v.relation.value, v.object, v.doc_id] for v in rng.sample(population, n_triples)
            ]
        else:
            raise ValueError("sample spec needs n_leaflets or n_triples")

        session = AnnotationSession(
            session_id=secrets.token_hex(4),
            run_id=run_id,
            annotator=annotator,
            seed=seed,
            assigned=assigned,
        )
        session_dir = self._session_dir(run_id, session.session_id)
        session_dir.mkdir(parents=True, exist_ok=True)
        (session_dir / "session.json").write_text(
            json.dumps(
                {
                    "session_id": session.session_id,
                    "run_id": run_id,
                    "annotator": annotator,
                    "seed": seed,
                    "assigned": assigned,
                    "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                },
                ensure_ascii=False,
                indent=2,
            ),
            encoding="utf-8",
        )
        return session

    def load_session(self, session_id: str) -> Optional[AnnotationSession]:
        for manifest in self.runs_dir.glob(f"*/sessions/{session_id}/session.json"):
            data = json.loads(manifest.read_text(encoding="utf-8"))
            return AnnotationSession(
                session_id=data["session_id"],
                run_id=data["run_id"],
                annotator=data["annotator"],
                seed=data["seed"],
                assigned=data["assigned"],
            )
        return None

    def verdicts_path(self, session: AnnotationSession) -> Path:
        return self._session_dir(session.run_id, session.session_id) / "verdicts.jsonl"

    def load_verdicts(self, session: AnnotationSession) -> list[dict]:
        path = self.verdicts_path(session)
        if not path.exists():
            return []
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows

    def append_verdict(self, session: AnnotationSession, triple_key: list, label: str, justification: str) -> None:
        """Append one verdict; duplicates for a triple are replay-rejected."""
        with self._lock:
            done = {tuple(v["triple_key"]) for v in self.load_verdicts(session)}
            if tuple(triple_key) in done:
                raise KeyError("verdict already recorded for this triple")
            with open(self.verdicts_path(session), "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "triple_key": list(triple_key),
                            "label": label,
                            "justification": justification,
                            "at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def _zero_report() -> dict:
    return {
        "total": 0,
        "counts": {label.value: 0 for label in Label},
        "percentages": {label.value: 0.0 for label in Label},
        "recall": None,
        "error": "zero verdicts",
    }


def session_report(store: SessionStore, session: AnnotationSession) -> dict:
    rows = store.load_verdicts(session)
    if not rows:
        return _zero_report()
    verdicts = [
        Verdict(
            triple_key=tuple(row["triple_key"]),
            label=Label(row["label"]),
            justification=row.get("justification", ""),
            source=Source.HUMAN,
        )
        for row in rows
    ]
    report = aggregate(verdicts)
    return {
        "total": report.total,
        "counts": {label.value: report.counts[label] for label in Label},
        "percentages": {label.value: report.percentages[label] for label in Label},
        "recall": None,
    }


class VerdictIn(BaseModel):
    triple_key: list
    label: str
    justification: str = ""


class SessionIn(BaseModel):
    run_id: str
    annotator: str = "anonymous"
    n_leaflets: Optional[int] = None
    n_triples: Optional[int] = None
    seed: int = 0


def create_app(runs_dir: Path, corpus_dir: Path, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="kgforge annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(runs_dir)
    corpus = Corpus(Path(corpus_dir))

    def get_session(session_id: str) -> AnnotationSession:
        session = store.load_session(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/api/sessions", status_code=201)
    def make_session(body: SessionIn):
        try:
            session = store.create_session(
                body.run_id, body.annotator, body.n_leaflets, body.n_triples, body.seed
            )
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (SampleTooLarge, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"session_id": session.session_id, "run_id": session.run_id, "total": len(session.assigned)}

    @app.get("/api/sessions/{session_id}/next")
    def next_triple(session_id: str):
        session = get_session(session_id)
        done = {tuple(v["triple_key"]) for v in store.load_verdicts(session)}
        total = len(session.assigned)
        for key in session.assigned:
            if tuple(key) not in done:
                subject, relation, obj, doc_id = key
                excerpt = ""
                record = corpus.records.get(doc_id)
                if record is not None and record.status in ("parsed", "extraction_done"):
                    excerpt = leaflet_excerpt(corpus.read_text(record), obj)
                return {
                    "triple_key": {"subject": subject, "relation": relation, "object": obj, "doc_id": doc_id},
                    "excerpt": excerpt,
                    "progress": {"completed": len(done), "total": total},
                }
        return Response(status_code=204)

    @app.post("/api/sessions/{session_id}/verdicts", status_code=204)
    def post_verdict(session_id: str, body: VerdictIn):
        session = get_session(session_id)
        if body.label not in {label.value for label in Label}:
            raise HTTPException(status_code=400, detail=f"invalid label: {body.label!r}")
        if len(body.triple_key) != 4:
            raise HTTPException(status_code=400, detail="triple_key must be [subject, relation, object, doc_id]")
        if list(body.triple_key) not in [list(k) for k in session.assigned]:
            raise HTTPException(status_code=400, detail="triple is not assigned to this session")
        try:
            store.append_verdict(session, body.triple_key, body.label, body.justification)
        except KeyError:
            raise HTTPException(status_code=409, detail="verdict already recorded for this triple")
        return Response(status_code=204)

    @app.get("/api/sessions/{session_id}/report")
    def get_report(session_id: str):
        session = get_session(session_id)
        return session_report(store, session)

    @app.get("/api/runs/{run_id}/judge-report")
    def judge_report(run_id: str):
        path = Path(runs_dir) / run_id / "judge_report.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"run {run_id} has no judge report")
        return json.loads(path.read_text(encoding="utf-8"))

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
