"""Document ingestion: link discovery, polite fetching, text extraction.

The corpus lives on disk as corpus/raw/<doc_id>.pdf|.txt plus
corpus/text/<doc_id>.txt, with one manifest line per document. Both PDF
and plain-text sources are accepted so the downstream pipeline can run
on text fixtures.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import urljoin, urlsplit
from urllib.robotparser import RobotFileParser

import httpx

from . import pdf_text

log = logging.getLogger(__name__)

USER_AGENT = "kgforge/0.1"

_STATUS_ORDER = {"fetched": 0, "parsed": 1, "extraction_done": 2}


class FetchFailed(RuntimeError):
    """Network or HTTP >= 400 failure while fetching one document."""


class EmptyText(ValueError):
    """Document produced zero words of text."""


@dataclass
class DocumentRecord:
    doc_id: str
    content_hash: str
    fetched_at: str
    source_url: Optional[str] = None
    status: str = "fetched"
    word_count: int = 0
    raw_file: str = ""
    error: Optional[str] = None
    text: str = ""  # loaded from corpus/text on demand, never in the manifest

    def advance(self, new_status: str) -> None:
        """Move the status forward; backwards transitions are bugs."""
        if new_status == "failed":
            self.status = "failed"
            return
        if self.status == "failed" or _STATUS_ORDER[new_status] < _STATUS_ORDER.get(self.status, -1):
            raise ValueError(f"{self.doc_id}: cannot move from {self.status!r} to {new_status!r}")
        self.status = new_status

    def fail(self, note: str) -> None:
        self.status = "failed"
        self.error = note

    def to_manifest(self) -> dict:
        data = asdict(self)
        data.pop("text")
        return data

    @classmethod
    def from_manifest(cls, data: dict) -> "DocumentRecord":
        return cls(**{k: v for k, v in data.items() if k != "text"})


@dataclass(frozen=True)
class ScrapePlan:
    index_urls: tuple[str, ...] = ()
    link_pattern: str = r"\.pdf$"
    rate_limit: int = 1000  # minimum milliseconds between requests per host
    max_documents: int = 10000

    def __post_init__(self):
        if self.rate_limit < 0:
            raise ValueError("rate_limit must be >= 0")
        if self.max_documents < 1:
            raise ValueError("max_documents must be >= 1")


class Corpus:
    """Disk layout plus the manifest; manifest writes are single-writer."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.raw_dir = self.root / "raw"
        self.text_dir = self.root / "text"
        self.manifest_path = self.root / "manifest.jsonl"
        self.records: dict[str, DocumentRecord] = {}
        self._lock = threading.Lock()
        if self.manifest_path.exists():
            self.load()

    def ensure_dirs(self) -> None:
        self.raw_dir.mkdir(parents=True, exist_ok=True)
        self.text_dir.mkdir(parents=True, exist_ok=True)

    def load(self) -> None:
        self.records = {}
        with open(self.manifest_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    record = DocumentRecord.from_manifest(json.loads(line))
                    self.records[record.doc_id] = record

    def save(self) -> None:
        with self._lock:
            self.root.mkdir(parents=True, exist_ok=True)
            with open(self.manifest_path, "w", encoding="utf-8") as fh:
                for doc_id in sorted(self.records):
                    fh.write(json.dumps(self.records[doc_id].to_manifest(), ensure_ascii=False) + "\n")

    def add(self, record: DocumentRecord) -> None:
        with self._lock:
            self.records[record.doc_id] = record

    def by_hash(self, content_hash: str) -> Optional[DocumentRecord]:
        for record in self.records.values():
            if record.content_hash == content_hash and record.status != "failed":
                return record
        return None

    def by_url(self, url: str) -> Optional[DocumentRecord]:
        for record in self.records.values():
            if record.source_url == url:
                return record
        return None

    def raw_path(self, record: DocumentRecord) -> Path:
        return self.raw_dir / record.raw_file

    def text_path(self, record: DocumentRecord) -> Path:
        return self.text_dir / f"{record.doc_id}.txt"

    def read_text(self, record: DocumentRecord) -> str:
        if not record.text:
            record.text = self.text_path(record).read_text(encoding="utf-8")
        return record.text


class _AnchorCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag.lower() == "a":
            for name, value in attrs:
                if name.lower() == "href" and value:
                    self.hrefs.append(value)


def extract_pdf_links(html: str, plan: ScrapePlan, base_url: str) -> list[str]:
    """Absolute, deduplicated anchor targets matching the plan's pattern,
    in document order. Unparseable pages yield an empty list."""
    collector = _AnchorCollector()
    try:
        collector.feed(html)
        collector.close()
    except Exception as exc:  # html.parser is lenient; belt and braces
        log.warning("unparseable index page at %s: %s", base_url, exc)
        return []
    pattern = re.compile(plan.link_pattern, re.IGNORECASE)
    seen = set()
    links = []
    for href in collector.hrefs:
        absolute = urljoin(base_url, href.strip())
        if pattern.search(absolute) and absolute not in seen:
            seen.add(absolute)
            links.append(absolute)
    return links


class HostRateLimiter:
    """Serializes request spacing per host across worker threads."""

    def __init__(self, min_interval_ms: int, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval_ms / 1000
        self.clock = clock
        self.sleep = sleep
        self._next_slot: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, host: str) -> None:
        with self._lock:
            now = self.clock()
            slot = max(now, self._next_slot.get(host, now))
            self._next_slot[host] = slot + self.min_interval
        delay = slot - self.clock()
        if delay > 0:
            self.sleep(delay)


class RobotsCache:
    """robots.txt gate, one fetch per host, stdlib semantics (404 allows,
    401/403 disallows)."""

    def __init__(self, client: httpx.Client):
        self.client = client
        self._parsers: dict[str, RobotFileParser] = {}

    def allowed(self, url: str) -> bool:
        parts = urlsplit(url)
        origin = f"{parts.scheme}://{parts.netloc}"
        parser = self._parsers.get(origin)
        if parser is None:
            parser = RobotFileParser()
            try:
                response = self.client.get(origin + "/robots.txt")
                if response.status_code in (401, 403):
                    parser.disallow_all = True
                elif response.status_code >= 400:
                    parser.allow_all = True
                else:
                    parser.parse(response.text.splitlines())
            except httpx.HTTPError:
                parser.allow_all = True
            self._parsers[origin] = parser
        return parser.can_fetch(USER_AGENT, url)


def _sanitize_stem(stem: str) -> str:
    cleaned = re.sub(r"[^a-z0-9]+", "-", stem.lower()).strip("-")
    return cleaned or "doc"


def _derive_doc_id(name_hint: str, content_hash: str) -> str:
    return f"{_sanitize_stem(name_hint)}-{content_hash[:8]}"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _raw_suffix(data: bytes, name_hint: str) -> str:
    if pdf_text.is_pdf(data):
        return ".pdf"
    if name_hint.lower().endswith(".pdf"):
        return ".pdf"
    return ".txt"


def fetch_document(
    url: str,
    plan: ScrapePlan,
    corpus: Corpus,
    client: Optional[httpx.Client] = None,
    limiter: Optional[HostRateLimiter] = None,
    robots: Optional[RobotsCache] = None,
) -> DocumentRecord:
    """Fetch one URL into the corpus.

    Failures produce a status=failed record instead of aborting the
    batch; refetches of known URLs or known content short-circuit.
    """
    existing = corpus.by_url(url)
    if existing is not None and existing.status != "failed":
        return existing

    own_client = client is None
    client = client or httpx.Client(headers={"User-Agent": USER_AGENT}, follow_redirects=True)
    try:
        url_stem = Path(urlsplit(url).path).stem or "doc"
        if robots is not None and not robots.allowed(url):
            record = DocumentRecord(
                doc_id=_derive_doc_id(url_stem, hashlib.sha256(url.encode()).hexdigest()),
                content_hash="",
                fetched_at=_utc_now(),
                source_url=url,
            )
            record.fail("disallowed by robots.txt")
            corpus.add(record)
            return record
        if limiter is not None:
            limiter.wait(urlsplit(url).netloc)
        try:
            response = client.get(url)
            if response.status_code >= 400:
                raise FetchFailed(f"HTTP {response.status_code}")
            data = response.content
        except (httpx.HTTPError, FetchFailed) as exc:
            record = DocumentRecord(
                doc_id=_derive_doc_id(url_stem, hashlib.sha256(url.encode()).hexdigest()),
                content_hash="",
                fetched_at=_utc_now(),
                source_url=url,
            )
            record.fail(str(exc))
            corpus.add(record)
            return record

        content_hash = hashlib.sha256(data).hexdigest()
        duplicate = corpus.by_hash(content_hash)
        if duplicate is not None:
            return duplicate
        doc_id = _derive_doc_id(url_stem, content_hash)
        corpus.ensure_dirs()
        raw_file = doc_id + _raw_suffix(data, url)
        (corpus.raw_dir / raw_file).write_bytes(data)
        record = DocumentRecord(
            doc_id=doc_id,
            content_hash=content_hash,
            fetched_at=_utc_now(),
            source_url=url,
            raw_file=raw_file,
        )
        corpus.add(record)
        return record
    finally:
        if own_client:
            client.close()


def adopt_local_file(path: Path, corpus: Corpus) -> DocumentRecord:
    """Bring a local leaflet file into the corpus (the no-network route)."""
    path = Path(path)
    data = path.read_bytes()
    content_hash = hashlib.sha256(data).hexdigest()
    existing = corpus.by_hash(content_hash)
    if existing is not None:
        return existing
    doc_id = _derive_doc_id(path.stem, content_hash)
    corpus.ensure_dirs()
    if path.parent.resolve() == corpus.raw_dir.resolve():
        raw_file = path.name
    else:
        raw_file = doc_id + _raw_suffix(data, path.name)
        (corpus.raw_dir / raw_file).write_bytes(data)
    record = DocumentRecord(
        doc_id=doc_id,
        content_hash=content_hash,
        fetched_at=_utc_now(),
        raw_file=raw_file,
    )
    corpus.add(record)
    return record


def document_to_text(record: DocumentRecord, corpus: Corpus) -> DocumentRecord:
    """Convert raw bytes to plain text and advance the record to parsed.

    PDF pages come out in page order joined by newlines; plain text
    passes through with line endings normalized. Unparseable or empty
    documents are marked failed, never raised out of a batch.
    """
    if record.status in ("parsed", "extraction_done"):
        return record
    if record.status == "failed":
        return record
    data = corpus.raw_path(record).read_bytes()
    try:
        if pdf_text.is_pdf(data):
            text = pdf_text.extract_text(data)
        else:
            text = data.decode("utf-8", errors="replace")
        text = text.replace("\r\n", "\n").replace("\r", "\n").replace("\x00", "")
        word_count = len(text.split())
        if word_count == 0:
            raise EmptyText("zero words after extraction")
    except pdf_text.UnparseablePdf as exc:
        record.fail(f"unparseable pdf: {exc}")
        return record
    except EmptyText as exc:
        record.fail(str(exc))
        return record
    record.text = text
    record.word_count = word_count
    corpus.ensure_dirs()
    corpus.text_path(record).write_text(text, encoding="utf-8")
    record.advance("parsed")
    return record


def scrape(
    plan: ScrapePlan,
    corpus: Corpus,
    local_sources: Iterable[Path] = (),
    client: Optional[httpx.Client] = None,
) -> list[DocumentRecord]:
    """Discover and fetch documents per plan, plus any local sources."""
    records: list[DocumentRecord] = []
    for path in local_sources:
        records.append(adopt_local_file(Path(path), corpus))

    if plan.index_urls:
        own_client = client is None
        client = client or httpx.Client(headers={"User-Agent": USER_AGENT}, follow_redirects=True)
        limiter = HostRateLimiter(plan.rate_limit)
        robots = RobotsCache(client)
        fetched = 0
        try:
            for index_url in plan.index_urls:
                if not robots.allowed(index_url):
                    log.warning("index page disallowed by robots.txt: %s", index_url)
                    continue
                limiter.wait(urlsplit(index_url).netloc)
                try:
                    response = client.get(index_url)
                    response.raise_for_status()
                except httpx.HTTPError as exc:
                    log.warning("index page fetch failed: %s (%s)", index_url, exc)
                    continue
                for link in extract_pdf_links(response.text, plan, index_url):
                    if fetched >= plan.max_documents:
                        break
                    record = fetch_document(link, plan, corpus, client=client, limiter=limiter, robots=robots)
                    records.append(record)
                    if record.status != "failed":
                        fetched += 1
                if fetched >= plan.max_documents:
                    break
        finally:
            if own_client:
                client.close()
    corpus.save()
    return records


def parse_corpus(corpus: Corpus) -> list[DocumentRecord]:
    """Adopt loose raw files, then convert every fetched record to text."""
    corpus.ensure_dirs()
    known_raw = {record.raw_file for record in corpus.records.values()}
    for path in sorted(corpus.raw_dir.iterdir()):
        if path.is_file() and path.name not in known_raw:
            adopt_local_file(path, corpus)
    parsed = []
    for doc_id in sorted(corpus.records):
        parsed.append(document_to_text(corpus.records[doc_id], corpus))
    corpus.save()
    return parsed
