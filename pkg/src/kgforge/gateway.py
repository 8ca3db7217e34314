"""Uniform client for chat-completion endpoints plus a deterministic mock.

The HTTP path speaks the OpenAI-compatible wire protocol, which covers
hosted and self-hosted deployments alike; the mock path replays a JSONL
script keyed by (doc_id, generation_index) so end-to-end runs are
reproducible byte for byte.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import httpx

log = logging.getLogger(__name__)

TOKEN_ENV_VAR = "KGFORGE_LLM_TOKEN"
BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2


class LlmUnavailable(RuntimeError):
    """Endpoint kept failing after all retries."""


class ContextOverflow(RuntimeError):
    """Prompt exceeds the model's context window; the document fails."""


class InsufficientGenerations(RuntimeError):
    """Fewer than ceil(n/2) generations succeeded for a document."""

    def __init__(self, doc_id: str, succeeded: int, requested: int):
        super().__init__(f"{doc_id}: only {succeeded} of {requested} generations succeeded")
        self.doc_id = doc_id
        self.succeeded = succeeded
        self.requested = requested


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str = ""
    model_name: str = ""
    temperature: float = 0.7
    max_output_tokens: int = 1024
    num_generations: int = 5
    timeout_ms: int = 60000
    max_retries: int = 3
    pool_size: int = 4
    # mock provider; set mock_script to bypass the network entirely
    mock_script: Optional[str] = None
    mock_context_window: Optional[int] = None

    def __post_init__(self):
        if self.num_generations < 1:
            raise ValueError("num_generations must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1 or self.timeout_ms < 1:
            raise ValueError("max_output_tokens and timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class Generation:
    doc_id: str
    generation_index: int
    raw_text: str
    model_name: str
    latency_ms: int


class MockProvider:
    """Replays a JSONL script of {doc_id, generation_index, text} lines.

    Missing entries behave like an unavailable endpoint, which lets
    fixtures script partial failures. An optional context window (in
    whitespace tokens) forces ContextOverflow for oversized prompts.
    """

    def __init__(self, script_path: str, context_window: Optional[int] = None):
        self.context_window = context_window
        self.script: dict[tuple[str, int], str] = {}
        with open(script_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self.script[(entry["doc_id"], int(entry["generation_index"]))] = entry["text"]

    def generate(self, prompt: str, doc_id: str, generation_index: int) -> str:
        if self.context_window is not None and len(prompt.split()) > self.context_window:
            raise ContextOverflow(
                f"{doc_id}: prompt of {len(prompt.split())} tokens exceeds window {self.context_window}"
            )
        key = (doc_id, generation_index)
        if key not in self.script:
            raise LlmUnavailable(f"mock script has no entry for {key}")
        return self.script[key]


class HttpProvider:
    """OpenAI-compatible chat-completions transport with retry/backoff."""

    def __init__(self, cfg: LlmConfig, sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self.sleep = sleep
        headers = {}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=cfg.timeout_ms / 1000, headers=headers)

    def close(self) -> None:
        self._client.close()

    def generate(self, prompt: str, doc_id: str, generation_index: int) -> str:
        url = self.cfg.endpoint_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
        }
        last_error: Optional[str] = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self.sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
            try:
                response = self._client.post(url, json=body)
            except httpx.TimeoutException as exc:
                last_error = f"timeout: {exc}"
                continue
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                detail = response.text[:500]
                if _looks_like_overflow(detail):
                    raise ContextOverflow(f"{doc_id}: {detail}")
                raise LlmUnavailable(f"{doc_id}: HTTP {response.status_code}: {detail}")
            data = response.json()
            return data["choices"][0]["message"]["content"]
        raise LlmUnavailable(f"{doc_id}: retries exhausted ({last_error})")


def _looks_like_overflow(detail: str) -> bool:
    lowered = detail.lower()
    return "context_length_exceeded" in lowered or (
        "context" in lowered and ("length" in lowered or "window" in lowered or "token" in lowered)
    )


class LlmClient:
    """Shareable facade over the configured provider.

    A semaphore bounds in-flight requests to cfg.pool_size regardless of
    how many workers hold the client.
    """

    def __init__(self, cfg: LlmConfig, sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        if cfg.mock_script:
            self.provider = MockProvider(cfg.mock_script, cfg.mock_context_window)
        else:
            if not cfg.endpoint_url:
                raise ValueError("endpoint_url required unless a mock script is configured")
            self.provider = HttpProvider(cfg, sleep=sleep)
        self._gate = threading.Semaphore(cfg.pool_size)

    def close(self) -> None:
        closer = getattr(self.provider, "close", None)
        if closer:
            closer()

    def complete(self, prompt: str, doc_id: str, generation_index: int = 0) -> Generation:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        start = time.monotonic()
        with self._gate:
            text = self.provider.generate(prompt, doc_id, generation_index)
        latency_ms = 0 if isinstance(self.provider, MockProvider) else int((time.monotonic() - start) * 1000)
        return Generation(
            doc_id=doc_id,
            generation_index=generation_index,
            raw_text=text,
            model_name=self.cfg.model_name,
            latency_ms=latency_ms,
        )

    def complete_n(self, prompt: str, doc_id: str) -> list[Generation]:
        """Run num_generations independent completions (no caching).

        Partial failures are tolerated while at least ceil(n/2)
        generations succeed; below that the document is unusable for
        majority voting and InsufficientGenerations is raised.
        ContextOverflow always fails the document immediately.
        """
        n = self.cfg.num_generations
        generations = []
        failures = []
        for index in range(n):
            try:
                generations.append(self.complete(prompt, doc_id, index))
            except ContextOverflow:
                raise
            except LlmUnavailable as exc:
                failures.append((index, str(exc)))
                log.warning("generation %d failed for %s: %s", index, doc_id, exc)
        if len(generations) < math.ceil(n / 2):
            raise InsufficientGenerations(doc_id, len(generations), n)
        return generations


def complete(prompt: str, cfg: LlmConfig, doc_id: str = "adhoc", generation_index: int = 0) -> Generation:
    client = LlmClient(cfg)
    try:
        return client.complete(prompt, doc_id, generation_index)
    finally:
        client.close()


def complete_n(prompt: str, cfg: LlmConfig, doc_id: str = "adhoc") -> list[Generation]:
    client = LlmClient(cfg)
    try:
        return client.complete_n(prompt, doc_id)
    finally:
        client.close()


def write_generations_jsonl(path: Path, generations: list[Generation]) -> None:
    rows = sorted(generations, key=lambda g: (g.doc_id, g.generation_index))
    with open(path, "w", encoding="utf-8") as fh:
        for g in rows:
            fh.write(
                json.dumps(
                    {
                        "doc_id": g.doc_id,
                        "generation_index": g.generation_index,
                        "raw_text": g.raw_text,
                        "model_name": g.model_name,
                        "latency_ms": g.latency_ms,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_generations_jsonl(path: Path) -> list[Generation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            out.append(
                Generation(
                    doc_id=data["doc_id"],
                    generation_index=int(data["generation_index"]),
                    raw_text=data["raw_text"],
                    model_name=data.get("model_name", ""),
                    latency_ms=int(data.get("latency_ms", 0)),
                )
            )
    return out
