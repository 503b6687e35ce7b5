"""Layout-aware conversion of multi-column, table-bearing pages to Markdown.

Pages arrive as geometric models (text boxes in PDF point coordinates,
origin bottom-left, y increasing upward). Each page is split at the
horizontal mid-line, each column is linearized top-to-bottom, and any
tables detected on the page are appended in pipe-table syntax, so the
emitted Markdown follows natural reading order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path


class LayoutError(Exception):
    """Raised for malformed page models or unreadable inputs."""


@dataclass
class PageElement:
    """One extracted text box. bbox is (x0, y0, x1, y1) in PDF points."""

    text: str
    bbox: tuple[float, float, float, float]
    page_no: int = 1

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if x0 > x1 or y0 > y1:
            raise LayoutError(f"inverted bbox {self.bbox} on page {self.page_no}")
        if self.page_no < 1:
            raise LayoutError(f"page_no must be >= 1, got {self.page_no}")


@dataclass
class ExtractedTable:
    """A rectangular grid of cell strings; the first row is the header."""

    rows: list[list[str]]
    page_no: int = 1


@dataclass
class PageModel:
    page_no: int
    elements: list[PageElement] = field(default_factory=list)
    tables: list[ExtractedTable] = field(default_factory=list)


@dataclass
class ConversionStats:
    pages: int = 0
    elements: int = 0
    tables: int = 0
    output_bytes: int = 0


def partition_columns(
    elements: list[PageElement],
) -> tuple[list[PageElement], list[PageElement]]:
    """Split elements at the page mid-line.

    mid = (max x1 + min x0) / 2; an element belongs to the left column iff
    its left edge x0 is strictly below mid. Full-width elements therefore
    land in the left column.
    """
    if not elements:
        return [], []
    mid = (max(e.bbox[2] for e in elements) + min(e.bbox[0] for e in elements)) / 2
    left = [e for e in elements if e.bbox[0] < mid]
    right = [e for e in elements if e.bbox[0] >= mid]
    return left, right


def order_reading(column: list[PageElement]) -> list[PageElement]:
    """Sort a column top-of-page first: y0 descending, ties by x0 ascending
    (stable, so equal keys keep their original order)."""
    return sorted(column, key=lambda e: (-e.bbox[1], e.bbox[0]))


_CONTROL = re.compile(r"[\x00-\x09\x0b-\x1f\x7f]")
_SPACE_RUN = re.compile(r" {2,}")
_TRAILING = re.compile(r" +(?=\n|$)")


def clean_text(raw: str) -> str:
    """Normalize extracted text: CRLF becomes LF, control characters other
    than LF become a single space, runs of spaces/tabs collapse to one
    space, and trailing whitespace is stripped from every line. Idempotent.
    """
    s = raw.replace("\r\n", "\n")
    s = _CONTROL.sub(" ", s)
    s = _SPACE_RUN.sub(" ", s)
    s = _TRAILING.sub("", s)
    return s


def render_table_markdown(table: ExtractedTable) -> str:
    """Render a table as Markdown pipe rows: header, separator, body."""
    rows = table.rows
    if not rows or not rows[0]:
        raise LayoutError(f"empty table on page {table.page_no}")
    width = len(rows[0])
    for r in rows:
        if len(r) != width:
            raise LayoutError(
                f"ragged table on page {table.page_no}: "
                f"expected {width} columns, found row with {len(r)}"
            )
    lines = ["| " + " | ".join(clean_text(c) for c in rows[0]) + " |"]
    lines.append("|" + "---|" * width)
    for r in rows[1:]:
        lines.append("| " + " | ".join(clean_text(c) for c in r) + " |")
    return "\n".join(lines)


def render_page_markdown(page: PageModel) -> str:
    """Emit one page: left column text, right column text, tables, then a
    blank-line page separator."""
    left, right = partition_columns(page.elements)
    out: list[str] = []
    for column in (left, right):
        for element in order_reading(column):
            out.append(clean_text(element.text) + "\n")
    for table in page.tables:
        out.append(render_table_markdown(table) + "\n")
    out.append("\n\n")
    return "".join(out)


def render_document_markdown(pages: list[PageModel]) -> str:
    return "".join(render_page_markdown(p) for p in sorted(pages, key=lambda p: p.page_no))


# ---------------------------------------------------------------------------
# Page-extraction adapters
# ---------------------------------------------------------------------------


def load_fixture_pages(path: str | Path) -> list[PageModel]:
    """Load page models from a JSON fixture.

    The file holds either one page object or a list of them:
    {"page_no": n, "elements": [{"text": ..., "bbox": [x0,y0,x1,y1]}],
     "tables": [{"rows": [[...]]}]}
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LayoutError(f"unreadable fixture {path}: {exc}") from exc
    raw_pages = data if isinstance(data, list) else [data]
    pages = []
    for i, obj in enumerate(raw_pages):
        if not isinstance(obj, dict):
            raise LayoutError(f"{path}: page {i} is not an object")
        page_no = int(obj.get("page_no", i + 1))
        elements = [
            PageElement(text=e["text"], bbox=tuple(float(v) for v in e["bbox"]), page_no=page_no)
            for e in obj.get("elements", [])
        ]
        tables = [
            ExtractedTable(rows=[[str(c) for c in row] for row in t["rows"]], page_no=page_no)
            for t in obj.get("tables", [])
        ]
        pages.append(PageModel(page_no=page_no, elements=elements, tables=tables))
    return pages


def extract_pages(path: str | Path) -> list[PageModel]:
    """Dispatch to the right adapter by file extension.

    .json loads a fixture page model; .pdf goes through the built-in PDF
    text extractor. Table detection is adapter territory: the PDF adapter
    extracts text boxes only, fixtures may carry tables.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        return load_fixture_pages(path)
    if suffix == ".pdf":
        from . import pdftext

        return pdftext.extract_pdf_pages(path)
    raise LayoutError(f"unsupported input type: {path} (expected .pdf or .json)")


def convert_document(input_path: str | Path, output_path: str | Path) -> ConversionStats:
    """Convert a document (PDF or JSON fixture) to a UTF-8 Markdown file.

    An empty document succeeds with pages=0 and an empty output file.
    """
    pages = extract_pages(input_path)
    markdown = render_document_markdown(pages)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    data = markdown.encode("utf-8")
    output_path.write_bytes(data)
    return ConversionStats(
        pages=len(pages),
        elements=sum(len(p.elements) for p in pages),
        tables=sum(len(p.tables) for p in pages),
        output_bytes=len(data),
    )
