"""A small PDF reader for engine-produced documents.

Covers the PDF 1.4 to 1.7 constructs that TeX engines and our fixture
generator emit: classic and stream cross-reference tables, object
streams, Flate and DCT encoded streams, simple and CID fonts, and the
text/image/path operators of ordinary page content.  It is a reader
for differential comparison, not a renderer for humans: text is
rasterised as glyph-advance boxes, so typography is compared through
glyph positions and metrics rather than outlines.
"""

from __future__ import annotations

from .cos import Name, PdfDocument, Ref, Stream
from .content import GlyphBox, ImageDraw, PathDraw, TextRun, interpret_page
from .raster import decode_image_pixels, render_page

__all__ = [
    "GlyphBox",
    "ImageDraw",
    "Name",
    "PathDraw",
    "PdfDocument",
    "Ref",
    "Stream",
    "TextRun",
    "decode_image_pixels",
    "interpret_page",
    "render_page",
]
