"""Minimal PDF text extraction for the layout adapter.

Covers the common subset produced by mainstream PDF writers: classic
cross-reference tables, plain or Flate-compressed content streams, and
simple (non-CID) fonts. Each text-showing operation becomes a positioned
run; runs on the same baseline are merged into one line element. Glyph
widths are estimated from the font size, which is sufficient for the
column-split geometry downstream.

Encrypted documents and exotic filters are rejected with a clear error;
table detection is out of scope here (fixture pages carry tables).
"""

from __future__ import annotations

import base64
import re
import zlib
from dataclasses import dataclass
from pathlib import Path

from .layout import LayoutError, PageElement, PageModel

_AVG_GLYPH_WIDTH = 0.5  # fraction of font size, rough average for Latin text
_LINE_TOLERANCE = 2.0   # points; runs within this y-distance share a line
_COLUMN_GAP_EMS = 3.0   # em widths; larger same-line gaps split elements


@dataclass(frozen=True)
class _Ref:
    num: int


class _Name(str):
    """PDF name token (the /Slash is stripped)."""


# ---------------------------------------------------------------------------
# Object-level parsing
# ---------------------------------------------------------------------------

_OBJ_HEADER = re.compile(rb"(\d+)\s+(\d+)\s+obj\b")
_WHITESPACE = b"\x00\t\n\x0c\r "
_DELIMITERS = b"()<>[]{}/%"


class _Lexer:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def _skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = self.data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == ord(b"%"):  # comment to end of line
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def peek_bytes(self, count: int) -> bytes:
        return self.data[self.pos : self.pos + count]

    def next_token(self):
        """Return the next syntactic item, or None at end of input."""
        self._skip_ws()
        data, n = self.data, len(self.data)
        if self.pos >= n:
            return None
        c = data[self.pos]
        if data.startswith(b"<<", self.pos):
            self.pos += 2
            return "<<"
        if data.startswith(b">>", self.pos):
            self.pos += 2
            return ">>"
        if c == ord(b"["):
            self.pos += 1
            return "["
        if c == ord(b"]"):
            self.pos += 1
            return "]"
        if c == ord(b"/"):
            start = self.pos + 1
            j = start
            while j < n and data[j] not in _WHITESPACE and data[j] not in _DELIMITERS:
                j += 1
            self.pos = j
            return _Name(data[start:j].decode("latin-1"))
        if c == ord(b"("):
            return self._literal_string()
        if c == ord(b"<"):
            return self._hex_string()
        if c in b"+-.0123456789":
            start = self.pos
            j = start + 1
            while j < n and data[j] in b"+-.0123456789":
                j += 1
            self.pos = j
            text = data[start:j].decode("latin-1")
            return float(text) if ("." in text) else int(text)
        # bare keyword (operator, true/false/null, obj/endobj/stream/R ...)
        start = self.pos
        j = start
        while j < n and data[j] not in _WHITESPACE and data[j] not in _DELIMITERS:
            j += 1
        self.pos = j if j > start else start + 1
        return data[start : self.pos].decode("latin-1")

    def _literal_string(self) -> bytes:
        data, n = self.data, len(self.data)
        assert data[self.pos] == ord(b"(")
        self.pos += 1
        out = bytearray()
        depth = 1
        while self.pos < n:
            c = data[self.pos]
            if c == ord(b"\\"):
                self.pos += 1
                if self.pos >= n:
                    break
                esc = data[self.pos]
                mapping = {
                    ord(b"n"): 10, ord(b"r"): 13, ord(b"t"): 9,
                    ord(b"b"): 8, ord(b"f"): 12,
                }
                if esc in mapping:
                    out.append(mapping[esc])
                    self.pos += 1
                elif esc in b"01234567":
                    digits = b""
                    while self.pos < n and len(digits) < 3 and data[self.pos] in b"01234567":
                        digits += data[self.pos : self.pos + 1]
                        self.pos += 1
                    out.append(int(digits, 8) & 0xFF)
                elif esc in b"\r\n":  # line continuation
                    self.pos += 1
                    if esc == ord(b"\r") and self.pos < n and data[self.pos] == ord(b"\n"):
                        self.pos += 1
                else:
                    out.append(esc)
                    self.pos += 1
                continue
            if c == ord(b"("):
                depth += 1
            elif c == ord(b")"):
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return bytes(out)
            out.append(c)
            self.pos += 1
        return bytes(out)

    def _hex_string(self) -> bytes:
        data, n = self.data, len(self.data)
        self.pos += 1
        digits = []
        while self.pos < n and data[self.pos] != ord(b">"):
            c = data[self.pos : self.pos + 1]
            if c not in _WHITESPACE:
                digits.append(c.decode("latin-1"))
            self.pos += 1
        self.pos += 1
        text = "".join(digits)
        if len(text) % 2:
            text += "0"
        return bytes.fromhex(text)


def _parse_value(lexer: _Lexer):
    tok = lexer.next_token()
    return _parse_from_token(lexer, tok)


def _parse_from_token(lexer: _Lexer, tok):
    if tok == "<<":
        out: dict[str, object] = {}
        while True:
            key = lexer.next_token()
            if key == ">>" or key is None:
                return out
            out[str(key)] = _parse_value(lexer)
    if tok == "[":
        arr = []
        while True:
            item = lexer.next_token()
            if item == "]" or item is None:
                return arr
            arr.append(_parse_from_token(lexer, item))
    if isinstance(tok, int):
        # possible indirect reference "n g R"
        save = lexer.pos
        gen = lexer.next_token()
        if isinstance(gen, int):
            maybe_r = lexer.next_token()
            if maybe_r == "R":
                return _Ref(tok)
        lexer.pos = save
        return tok
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok == "null":
        return None
    return tok


class _Document:
    def __init__(self, data: bytes):
        self.data = data
        self.objects: dict[int, tuple[object, bytes | None]] = {}
        self._check_encryption()
        self._scan_objects()

    def _check_encryption(self) -> None:
        for m in re.finditer(rb"trailer", self.data):
            lexer = _Lexer(self.data, m.end())
            trailer = _parse_value(lexer)
            if isinstance(trailer, dict) and "Encrypt" in trailer:
                raise LayoutError("encrypted PDF is not supported")

    def _scan_objects(self) -> None:
        pos = 0
        data = self.data
        while True:
            m = _OBJ_HEADER.search(data, pos)
            if not m:
                break
            num = int(m.group(1))
            lexer = _Lexer(data, m.end())
            value = _parse_value(lexer)
            stream: bytes | None = None
            lexer._skip_ws()
            if lexer.peek_bytes(6) == b"stream":
                start = lexer.pos + 6
                if data[start : start + 2] == b"\r\n":
                    start += 2
                elif data[start : start + 1] in (b"\n", b"\r"):
                    start += 1
                length = value.get("Length") if isinstance(value, dict) else None
                if isinstance(length, _Ref):
                    length = self._length_lookahead(length.num)
                if isinstance(length, int):
                    end = start + length
                else:
                    end = data.find(b"endstream", start)
                    if end < 0:
                        raise LayoutError("unterminated stream object")
                stream = data[start:end]
                pos = data.find(b"endobj", end)
                pos = pos + 6 if pos >= 0 else end
            else:
                pos = lexer.pos
            self.objects[num] = (value, stream)

    def _length_lookahead(self, num: int) -> int | None:
        m = re.search(rb"\b%d\s+\d+\s+obj" % num, self.data)
        if not m:
            return None
        val = _parse_value(_Lexer(self.data, m.end()))
        return val if isinstance(val, int) else None

    def resolve(self, value):
        seen = set()
        while isinstance(value, _Ref):
            if value.num in seen or value.num not in self.objects:
                return None
            seen.add(value.num)
            value = self.objects[value.num][0]
        return value

    def stream_bytes(self, ref) -> bytes:
        obj = ref
        while isinstance(obj, _Ref):
            entry = self.objects.get(obj.num)
            if entry is None:
                return b""
            value, raw = entry
            if raw is not None:
                return _decode_stream(self.resolve(value) or {}, raw)
            obj = value
        return b""

    def page_dicts(self) -> list[dict]:
        catalog = None
        for value, _ in self.objects.values():
            if isinstance(value, dict) and value.get("Type") == "Catalog":
                catalog = value
                break
        if catalog is None:
            raise LayoutError("no document catalog found (not a PDF?)")
        pages: list[dict] = []

        def walk(node, depth=0):
            node = self.resolve(node)
            if not isinstance(node, dict) or depth > 64:
                return
            if node.get("Type") == "Page":
                pages.append(node)
            else:
                for kid in self.resolve(node.get("Kids")) or []:
                    walk(kid, depth + 1)

        walk(catalog.get("Pages"))
        return pages


def _decode_stream(info: dict, raw: bytes) -> bytes:
    filters = info.get("Filter")
    if filters is None:
        return raw
    if not isinstance(filters, list):
        filters = [filters]
    data = raw
    for f in filters:
        name = str(f)
        if name == "FlateDecode":
            try:
                data = zlib.decompress(data)
            except zlib.error as exc:
                raise LayoutError(f"corrupt Flate stream: {exc}") from exc
        elif name == "ASCII85Decode":
            body = data.strip()
            try:
                data = base64.a85decode(body, adobe=True)
            except ValueError:
                try:
                    data = base64.a85decode(body.rstrip(b"~>"), adobe=False)
                except ValueError as exc:
                    raise LayoutError(f"corrupt ASCII85 stream: {exc}") from exc
        else:
            raise LayoutError(f"unsupported stream filter /{name}")
    return data


# ---------------------------------------------------------------------------
# Content-stream interpretation
# ---------------------------------------------------------------------------


@dataclass
class _Run:
    text: str
    x: float
    y: float
    size: float


def _execute_content(content: bytes) -> list[_Run]:
    lexer = _Lexer(content)
    stack: list = []
    runs: list[_Run] = []
    x = y = 0.0
    line_x = line_y = 0.0
    size = 12.0
    leading = 0.0

    def show(raw) -> None:
        nonlocal x
        if isinstance(raw, bytes):
            text = raw.decode("latin-1")
        else:
            text = str(raw)
        if text:
            runs.append(_Run(text=text, x=x, y=y, size=size))
            x += _AVG_GLYPH_WIDTH * size * len(text)

    while True:
        tok = lexer.next_token()
        if tok is None:
            break
        if tok in ("<<", "["):
            stack.append(_parse_from_token(lexer, tok))
            continue
        if not isinstance(tok, str) or isinstance(tok, _Name):
            stack.append(tok)
            continue
        if tok in ("true", "false", "null"):
            stack.append(tok)
            continue
        op = tok
        if op == "BT":
            x = y = line_x = line_y = 0.0
        elif op == "Tf" and len(stack) >= 2:
            size = float(stack[-1])
        elif op == "Tm" and len(stack) >= 6:
            line_x, line_y = float(stack[-2]), float(stack[-1])
            x, y = line_x, line_y
        elif op in ("Td", "TD") and len(stack) >= 2:
            tx, ty = float(stack[-2]), float(stack[-1])
            if op == "TD":
                leading = -ty
            line_x += tx
            line_y += ty
            x, y = line_x, line_y
        elif op == "TL" and stack:
            leading = float(stack[-1])
        elif op == "T*":
            line_y -= leading
            x, y = line_x, line_y
        elif op == "Tj" and stack:
            show(stack[-1])
        elif op == "'" and stack:
            line_y -= leading
            x, y = line_x, line_y
            show(stack[-1])
        elif op == '"' and len(stack) >= 3:
            line_y -= leading
            x, y = line_x, line_y
            show(stack[-1])
        elif op == "TJ" and stack and isinstance(stack[-1], list):
            for item in stack[-1]:
                if isinstance(item, bytes):
                    show(item)
        stack.clear()
    return runs


def _run_end(run: _Run) -> float:
    return run.x + _AVG_GLYPH_WIDTH * run.size * len(run.text)


def _runs_to_elements(runs: list[_Run], page_no: int) -> list[PageElement]:
    """Merge runs sharing a baseline into line elements with estimated
    boxes. A horizontal gap wider than _COLUMN_GAP_EMS em starts a new
    element, so side-by-side columns stay separate elements even when
    their baselines align."""
    ordered = sorted(runs, key=lambda r: (-r.y, r.x))
    elements: list[PageElement] = []
    group: list[_Run] = []

    def flush() -> None:
        if not group:
            return
        text = " ".join(r.text for r in group)
        x0 = min(r.x for r in group)
        y0 = min(r.y for r in group)
        x1 = max(_run_end(r) for r in group)
        y1 = max(r.y + r.size for r in group)
        elements.append(PageElement(text=text, bbox=(x0, y0, x1, y1), page_no=page_no))
        group.clear()

    for run in ordered:
        if group:
            new_line = abs(run.y - group[0].y) > _LINE_TOLERANCE
            gap = run.x - _run_end(group[-1])
            new_column = gap > _COLUMN_GAP_EMS * max(run.size, group[-1].size)
            if new_line or new_column:
                flush()
        group.append(run)
    flush()
    return elements


def extract_pdf_pages(path: str | Path) -> list[PageModel]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LayoutError(f"unreadable input {path}: {exc}") from exc
    if not data.startswith(b"%PDF"):
        raise LayoutError(f"{path} does not look like a PDF")
    doc = _Document(data)
    pages: list[PageModel] = []
    for i, page in enumerate(doc.page_dicts(), start=1):
        contents = doc.resolve(page.get("Contents"))
        raw_refs = page.get("Contents")
        chunks: list[bytes] = []
        if isinstance(contents, list):
            for ref in contents:
                chunks.append(doc.stream_bytes(ref))
        elif raw_refs is not None:
            chunks.append(doc.stream_bytes(raw_refs))
        content = b"\n".join(chunks)
        runs = _execute_content(content) if content else []
        pages.append(PageModel(page_no=i, elements=_runs_to_elements(runs, i)))
    return pages
