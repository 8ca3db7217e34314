"""Plain-text extraction from simple text-based PDFs.

No PDF library is available in this environment, so this is a small
reader for the common case this tool meets: uncompressed or FlateDecode
content streams with single-byte (WinAnsi/Latin-1) encoded text
operators. Scanned pages, CID fonts, and exotic filters are out of
scope and raise UnparseablePdf. Extractor output is accepted verbatim:
no layout reconstruction, no hyphenation repair.
"""

from __future__ import annotations

import base64
import re
import zlib


class UnparseablePdf(ValueError):
    """The document is not a PDF this reader can make text out of."""


_OBJ_RE = re.compile(rb"(\d+)\s+(\d+)\s+obj\b", re.S)
_REF_RE = re.compile(rb"(\d+)\s+\d+\s+R")


def is_pdf(data: bytes) -> bool:
    return data[:5] == b"%PDF-"


def extract_text(data: bytes) -> str:
    """Page texts in page-tree order, pages joined by a newline."""
    if not is_pdf(data):
        raise UnparseablePdf("missing %PDF header")
    objects = _split_objects(data)
    if not objects:
        raise UnparseablePdf("no objects found")
    page_numbers = _page_order(objects)
    if not page_numbers:
        raise UnparseablePdf("no pages found")
    pages = []
    for num in page_numbers:
        content = b"".join(
            _stream_bytes(objects[ref]) for ref in _content_refs(objects[num]) if ref in objects
        )
        pages.append(_content_text(content).strip("\n"))
    return "\n".join(pages)


def _split_objects(data: bytes) -> dict[int, bytes]:
    objects: dict[int, bytes] = {}
    for match in _OBJ_RE.finditer(data):
        end = data.find(b"endobj", match.end())
        if end == -1:
            continue
        objects[int(match.group(1))] = data[match.end() : end]
    return objects


def _page_order(objects: dict[int, bytes]) -> list[int]:
    """Walk /Catalog -> /Pages -> /Kids; fall back to object order."""
    root_pages = None
    for body in objects.values():
        if b"/Type" in body and b"/Catalog" in body:
            match = re.search(rb"/Pages\s+(\d+)\s+\d+\s+R", body)
            if match:
                root_pages = int(match.group(1))
            break

    ordered: list[int] = []

    def walk(num: int, seen: set[int]) -> None:
        if num in seen or num not in objects:
            return
        seen.add(num)
        body = objects[num]
        if b"/Kids" in body:
            kids = re.search(rb"/Kids\s*\[(.*?)\]", body, re.S)
            if kids:
                for ref in _REF_RE.finditer(kids.group(1)):
                    walk(int(ref.group(1)), seen)
        elif b"/Type" in body and b"/Page" in body:
            ordered.append(num)

    if root_pages is not None:
        walk(root_pages, set())
    if not ordered:
        ordered = [n for n in sorted(objects) if re.search(rb"/Type\s*/Page[^s]", objects[n] + b" ")]
    return ordered


def _content_refs(page_body: bytes) -> list[int]:
    match = re.search(rb"/Contents\s*\[(.*?)\]", page_body, re.S)
    if match:
        return [int(m.group(1)) for m in _REF_RE.finditer(match.group(1))]
    match = re.search(rb"/Contents\s+(\d+)\s+\d+\s+R", page_body)
    return [int(match.group(1))] if match else []


_FILTER_NAME = re.compile(rb"/(\w+)")


def _stream_filters(dictionary: bytes) -> list[bytes]:
    match = re.search(rb"/Filter\s*(\[[^\]]*\]|/\w+)", dictionary)
    return _FILTER_NAME.findall(match.group(1)) if match else []


def _stream_bytes(body: bytes) -> bytes:
    start = body.find(b"stream")
    if start == -1:
        return b""
    dictionary = body[:start]
    start += len(b"stream")
    if body[start : start + 2] == b"\r\n":
        start += 2
    elif body[start : start + 1] in (b"\n", b"\r"):
        start += 1
    end = body.rfind(b"endstream")
    if end == -1:
        return b""
    raw = body[start:end].rstrip(b"\r\n")
    for name in _stream_filters(dictionary):
        if name == b"ASCII85Decode":
            try:
                payload = raw.strip()
                if payload.endswith(b"~>"):
                    payload = payload[:-2]
                raw = base64.a85decode(payload.replace(b"\n", b"").replace(b"\r", b""))
            except ValueError as exc:
                raise UnparseablePdf(f"bad ascii85 stream: {exc}") from None
        elif name == b"ASCIIHexDecode":
            digits = re.sub(rb"[\s>]", b"", raw)
            try:
                raw = bytes.fromhex(digits.decode("ascii"))
            except ValueError as exc:
                raise UnparseablePdf(f"bad asciihex stream: {exc}") from None
        elif name == b"FlateDecode":
            try:
                raw = zlib.decompress(raw)
            except zlib.error as exc:
                raise UnparseablePdf(f"bad flate stream: {exc}") from None
        else:
            raise UnparseablePdf(f"unsupported stream filter: {name.decode('latin-1')}")
    return raw


def _content_text(content: bytes) -> str:
    """Collect show-text operator arguments from one content stream."""
    parts: list[str] = []
    pending: list[str] = []
    i, n = 0, len(content)

    def flush(separator: str = "") -> None:
        if pending:
            parts.append("".join(pending))
            pending.clear()
        if separator and parts and not parts[-1].endswith("\n"):
            parts.append(separator)

    while i < n:
        ch = content[i : i + 1]
        if ch == b"(":
            text, i = _literal_string(content, i)
            pending.append(text)
        elif ch == b"<" and content[i : i + 2] != b"<<":
            end = content.find(b">", i)
            if end == -1:
                break
            hex_digits = re.sub(rb"\s", b"", content[i + 1 : end])
            if len(hex_digits) % 2:
                hex_digits += b"0"
            try:
                pending.append(bytes.fromhex(hex_digits.decode("ascii")).decode("latin-1"))
            except ValueError:
                pass
            i = end + 1
        elif ch == b"<":
            i += 2
        elif ch.isalpha() or ch in (b"'", b'"', b"*"):
            j = i
            while j < n and not content[j : j + 1].isspace() and content[j : j + 1] not in b"([</%":
                j += 1
            op = content[i:j]
            if op in (b"Tj", b"TJ", b"'", b'"'):
                flush()
            elif op in (b"Td", b"TD", b"T*", b"ET"):
                flush("\n")
            i = j
        elif ch == b"%":
            eol = content.find(b"\n", i)
            i = n if eol == -1 else eol + 1
        else:
            i += 1
    flush()
    return "".join(parts)


def _literal_string(content: bytes, start: int) -> tuple[str, int]:
    """Parse a ( ... ) string with escapes and nesting; returns (text, next_index)."""
    out = bytearray()
    depth = 0
    i = start
    n = len(content)
    while i < n:
        ch = content[i]
        if ch == 0x5C:  # backslash
            i += 1
            if i >= n:
                break
            esc = content[i : i + 1]
            mapping = {b"n": b"\n", b"r": b"\r", b"t": b"\t", b"b": b"\b", b"f": b"\f"}
            if esc in mapping:
                out += mapping[esc]
            elif esc.isdigit():
                digits = esc
                while len(digits) < 3 and content[i + 1 : i + 2].isdigit():
                    i += 1
                    digits += content[i : i + 1]
                out.append(int(digits, 8) & 0xFF)
            elif esc in (b"\n", b"\r"):
                pass  # line continuation
            else:
                out += esc
            i += 1
        elif ch == 0x28:  # (
            depth += 1
            if depth > 1:
                out.append(ch)
            i += 1
        elif ch == 0x29:  # )
            depth -= 1
            if depth == 0:
                return out.decode("latin-1"), i + 1
            out.append(ch)
            i += 1
        else:
            out.append(ch)
            i += 1
    return out.decode("latin-1"), i
