"""Fixture PDFs built with reportlab in invariant mode.

``invariant=1`` pins the creation date and document id and
``pageCompression=0`` leaves content streams readable, so generated
files are byte-reproducible and easy to assert against directly.
"""

from __future__ import annotations

from pathlib import Path

from reportlab.lib.pagesizes import A4
from reportlab.pdfgen.canvas import Canvas

POINT = 1  # reportlab positions in points by default


def make_canvas(path: Path, pagesize=A4, compress=0) -> Canvas:
    return Canvas(
        str(path), pagesize=pagesize, pageCompression=compress, invariant=1
    )


def simple_text_pdf(path: Path, lines, font="Helvetica", size=11, pagesize=A4):
    """One page of plain text lines, top-down from 780pt."""
    c = make_canvas(path, pagesize)
    y = 780
    for line in lines:
        c.setFont(font, size)
        c.drawString(72, y, line)
        y -= size * 1.4
    c.showPage()
    c.save()
    return path


def multi_page_pdf(path: Path, page_texts, font="Helvetica", size=11):
    c = make_canvas(path)
    for lines in page_texts:
        y = 780
        for line in lines:
            c.setFont(font, size)
            c.drawString(72, y, line)
            y -= size * 1.4
        c.showPage()
    c.save()
    return path
