import io
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from kgforge.schema import validate_relation
from kgforge.voting import VotedTriple

FIXTURES = Path(__file__).parent / "fixtures"

DOC_A = "leaflet-alphadol-fdd14a66"
DOC_B = "leaflet-betrixan-5c887520"
DOC_C = "leaflet-cormiva-f9e01011"


def make_voted(subject, relation, obj, frequency, runs, doc_id) -> VotedTriple:
    return VotedTriple(
        subject=subject,
        relation=validate_relation(relation),
        object=obj,
        frequency=frequency,
        runs=runs,
        confidence=frequency / runs,
        doc_id=doc_id,
    )


class _Handler(BaseHTTPRequestHandler):
    def _serve(self):
        self.server.requests.append((self.command, self.path))
        route = self.server.routes.get(self.path)
        if route is None:
            self.send_response(404)
            self.end_headers()
            return
        if callable(route):
            route = route(self)
        status, content_type, body = route
        if isinstance(body, str):
            body = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        self._serve()

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.server.bodies.append(self.rfile.read(length))
        self._serve()

    def log_message(self, *args):
        pass


class LocalServer:
    """Tiny scripted HTTP server for fetch/gateway tests.

    routes maps a path to (status, content_type, body) or to a callable
    returning that tuple; every request is recorded on .requests.
    """

    def __init__(self):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.server.routes = {}
        self.server.requests = []
        self.server.bodies = []
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    @property
    def routes(self):
        return self.server.routes

    @property
    def requests(self):
        return self.server.requests

    def url(self, path: str) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}{path}"


@pytest.fixture
def local_server():
    with LocalServer() as server:
        yield server


def chat_completion_body(text: str) -> str:
    return json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]})


def make_pdf(pages: list[str]) -> bytes:
    """Two-line-per-page PDF built with reportlab for parser tests."""
    from reportlab.lib.pagesizes import A4
    from reportlab.pdfgen import canvas

    buffer = io.BytesIO()
    pdf = canvas.Canvas(buffer, pagesize=A4)
    for page in pages:
        y = 800
        for line in page.splitlines():
            pdf.drawString(72, y, line)
            y -= 14
        pdf.showPage()
    pdf.save()
    return buffer.getvalue()


_acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    module = getattr(item, "module", None)
    if report.when == "call" and module is not None and module.__name__ == "test_acceptance":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _acceptance_results.append((doc, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for desc, passed in _acceptance_results:
            terminalreporter.write_line(("PASS  " if passed else "FAIL  ") + desc)
