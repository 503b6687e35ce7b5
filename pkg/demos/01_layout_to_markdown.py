"""
Layout-aware document conversion
================================

Turn a page model (text elements with bounding boxes, plus extracted
tables) into clean Markdown. Elements are split into columns around the
page midline, read top-to-bottom left-to-right, and tables come out in
pipe syntax.
"""

from pathlib import Path

from ragforge.layout import extract_pages, render_document_markdown

fixture = Path(__file__).parent.parent / "tests" / "data" / "fixture_two_column.json"

# The fixture stores its elements deliberately out of order, the way a
# real PDF content stream often does.
pages = extract_pages(fixture)
print(f"loaded {len(pages)} pages")
for page in pages:
    print(f"  page {page.page_no}: {len(page.elements)} elements, {len(page.tables)} tables")

# Rendering partitions each page into columns, orders the columns into
# reading order, and appends any tables as Markdown pipe tables.
markdown = render_document_markdown(pages)
print("\n--- converted Markdown " + "-" * 40)
print(markdown)
