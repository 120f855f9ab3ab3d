"""PDF reader: object layer, page tree, fonts, interpreter, raster.

Fixtures come from reportlab with compression off, so raw bytes can be
checked with regexes as an independent oracle for what the reader
should report.
"""

from __future__ import annotations

import re
import zlib

import numpy as np
import pytest

from difftex.errors import PageOutOfRange, PdfParseError
from difftex.pdf import (
    Name,
    PdfDocument,
    Ref,
    TextRun,
    ImageDraw,
    PathDraw,
    interpret_page,
    render_page,
)
from difftex.pdf.cos import Lexer
from difftex.pdf.filters import decode_stream
from difftex.pdf.fonts import glyph_name_to_unicode, parse_tounicode

from pdfgen import make_canvas, multi_page_pdf, simple_text_pdf


# ------------------------------------------------------------------ lexer


def lex_one(data: bytes):
    return Lexer(data).parse_object()


def test_lexer_scalars():
    assert lex_one(b"42") == 42
    assert lex_one(b"-17") == -17
    assert lex_one(b"3.14") == pytest.approx(3.14)
    assert lex_one(b".5") == pytest.approx(0.5)
    assert lex_one(b"true") is True
    assert lex_one(b"false") is False
    assert lex_one(b"null") is None


def test_lexer_names_and_strings():
    assert lex_one(b"/Type") == "Type"
    assert isinstance(lex_one(b"/Type"), Name)
    assert lex_one(b"/A#20B") == "A B"
    assert lex_one(b"(hello)") == b"hello"
    assert lex_one(rb"(a\(b\)c)") == b"a(b)c"
    assert lex_one(b"(nested (parens) ok)") == b"nested (parens) ok"
    assert lex_one(rb"(\101\102)") == b"AB"
    assert lex_one(rb"(tab\there)") == b"tab\there"
    assert lex_one(b"<48656C6C6F>") == b"Hello"
    assert lex_one(b"<48656C6C6F2>") == b"Hello " # odd digit pads with 0
    assert lex_one(b"<48 65 6C>") == b"Hel"


def test_lexer_collections_and_refs():
    assert lex_one(b"[1 2 /X (s)]") == [1, 2, "X", b"s"]
    assert lex_one(b"<< /A 1 /B [2 3] >>") == {"A": 1, "B": [2, 3]}
    assert lex_one(b"12 0 R") == Ref(12, 0)
    assert lex_one(b"[1 0 R 2]") == [Ref(1, 0), 2]
    # Two plain integers do not collapse into a reference.
    assert lex_one(b"[1 2]") == [1, 2]
    assert lex_one(b"% comment\n7") == 7


def test_lexer_rejects_garbage():
    with pytest.raises(PdfParseError):
        lex_one(b"(unterminated")
    with pytest.raises(PdfParseError):
        lex_one(b"<< /A 1")
    with pytest.raises(PdfParseError):
        lex_one(b"")


# ---------------------------------------------------------------- filters


def test_flate_roundtrip_with_png_predictor():
    # Rows of increasing bytes predict well; build predictor-2 (Up) data
    # by hand and check the decode matches the original.
    raw = bytes(range(10)) * 3
    columns, colors = 10, 1
    rows = [raw[i : i + columns] for i in range(0, 30, columns)]
    encoded = bytearray()
    prev = bytes(columns)
    for row in rows:
        encoded.append(2)  # Up filter
        encoded.extend((row[i] - prev[i]) & 0xFF for i in range(columns))
        prev = row
    packed = zlib.compress(bytes(encoded))
    out, terminal = decode_stream(
        packed,
        ["FlateDecode"],
        [{"Predictor": 12, "Columns": columns, "Colors": colors}],
    )
    assert out == raw
    assert terminal is None


def test_dct_is_passed_through():
    out, terminal = decode_stream(b"\xff\xd8jpegdata", ["DCTDecode"], [])
    assert out == b"\xff\xd8jpegdata"
    assert terminal == "DCTDecode"


def test_unknown_filter_rejected():
    with pytest.raises(PdfParseError):
        decode_stream(b"x", ["MysteryDecode"], [])


# ------------------------------------------------------------------ fonts


def test_glyph_names():
    assert glyph_name_to_unicode("a") == "a"
    assert glyph_name_to_unicode("comma") == ","
    assert glyph_name_to_unicode("fi") == "ﬁ"
    assert glyph_name_to_unicode("eacute") == "é"
    assert glyph_name_to_unicode("uni0041") == "A"
    assert glyph_name_to_unicode("u1D400") == "\U0001d400"
    assert glyph_name_to_unicode("g123456") == ""


def test_parse_tounicode_chars_and_ranges():
    cmap = (
        b"/CIDInit /ProcSet findresource begin\n"
        b"beginbfchar\n<0041> <0061>\n<0042> <FB01>\nendbfchar\n"
        b"beginbfrange\n<0050> <0052> <0030>\n"
        b"<0060> <0061> [<0041> <00420043>]\nendbfrange\nend\n"
    )
    m = parse_tounicode(cmap)
    assert m[0x41] == "a"
    assert m[0x42] == "ﬁ"
    assert m[0x50] == "0" and m[0x51] == "1" and m[0x52] == "2"
    assert m[0x60] == "A"
    assert m[0x61] == "BC"


# --------------------------------------------------------------- document


def test_open_simple_document(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["hello world"])
    doc = PdfDocument(path.read_bytes())
    assert doc.page_count == 1
    page = doc.page(0)
    x0, y0, x1, y1 = page.media_box
    assert (x1 - x0, y1 - y0) == (pytest.approx(595.27, abs=0.1), pytest.approx(841.89, abs=0.1))
    with pytest.raises(PageOutOfRange):
        doc.page(1)
    with pytest.raises(PageOutOfRange):
        doc.page(-1)


def test_page_count_matches_writer(tmp_path):
    path = multi_page_pdf(tmp_path / "t.pdf", [["a"], ["b"], ["c"]])
    doc = PdfDocument(path.read_bytes())
    assert doc.page_count == 3


def test_compressed_streams_decode(tmp_path):
    # Compression on: content must come back identical to the
    # uncompressed twin's content.
    plain = simple_text_pdf(tmp_path / "p.pdf", ["same content"])
    c = make_canvas(tmp_path / "z.pdf", compress=1)
    c.setFont("Helvetica", 11)
    c.drawString(72, 780, "same content")
    c.showPage()
    c.save()
    doc_p = PdfDocument(plain.read_bytes())
    doc_z = PdfDocument((tmp_path / "z.pdf").read_bytes())
    assert doc_p.page(0).content_bytes() == doc_z.page(0).content_bytes()


def test_encrypted_document_rejected(tmp_path):
    c = make_canvas(tmp_path / "e.pdf")
    c.setFont("Helvetica", 11)
    c.drawString(72, 780, "secret")
    c.showPage()
    c.setEncrypt("hunter2")
    c.save()
    with pytest.raises(PdfParseError, match="encrypt"):
        PdfDocument((tmp_path / "e.pdf").read_bytes())


def test_not_a_pdf_rejected():
    with pytest.raises(PdfParseError):
        PdfDocument(b"this is not a pdf at all")


def test_broken_xref_recovers_by_scanning(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["rescue me"])
    data = bytearray(path.read_bytes())
    # Corrupt the startxref offset.
    marker = data.rfind(b"startxref")
    end = data.find(b"\n", marker + 10)
    data[marker + 10 : end] = b"9" * (end - marker - 10)
    doc = PdfDocument(bytes(data))
    assert doc.page_count == 1
    text = "".join(
        ev.text for ev in interpret_page(doc.page(0)) if isinstance(ev, TextRun)
    )
    assert "rescue me" in text


def test_junk_before_header_is_tolerated(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["x"])
    doc = PdfDocument(b"junk\n" + path.read_bytes())
    assert doc.page_count == 1


# ----------------------------------------------------------- interpreter


def page_text(doc, index=0) -> str:
    return "".join(
        ev.text for ev in interpret_page(doc.page(index)) if isinstance(ev, TextRun)
    )


def test_text_comes_back_verbatim(tmp_path):
    lines = ["The quick brown fox", "jumps over 42 lazy dogs."]
    path = simple_text_pdf(tmp_path / "t.pdf", lines)
    doc = PdfDocument(path.read_bytes())
    text = page_text(doc)
    for line in lines:
        assert line in text


def test_winansi_accents_decode(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["café touché"])
    doc = PdfDocument(path.read_bytes())
    assert "café touché" in page_text(doc)


def test_glyph_positions_track_pen(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["iiii"], font="Courier", size=10)
    doc = PdfDocument(path.read_bytes())
    runs = [ev for ev in interpret_page(doc.page(0)) if isinstance(ev, TextRun)]
    (run,) = runs
    # Courier is monospaced at 600/1000: each advance is 6pt at size 10.
    xs = [g.origin[0] for g in run.glyphs]
    assert xs[0] == pytest.approx(72.0)
    deltas = [b - a for a, b in zip(xs, xs[1:])]
    assert all(d == pytest.approx(6.0) for d in deltas)
    assert run.size == pytest.approx(10.0)


def test_run_color_and_size(tmp_path):
    c = make_canvas(tmp_path / "t.pdf")
    c.setFont("Times-Roman", 14)
    c.setFillColorRGB(1, 0, 0)
    c.drawString(100, 700, "red words")
    c.showPage()
    c.save()
    doc = PdfDocument((tmp_path / "t.pdf").read_bytes())
    (run,) = [ev for ev in interpret_page(doc.page(0)) if isinstance(ev, TextRun)]
    assert run.color == pytest.approx((1.0, 0.0, 0.0))
    assert run.size == pytest.approx(14.0)
    assert run.base_font == "Times-Roman"


def test_rect_fill_event(tmp_path):
    c = make_canvas(tmp_path / "t.pdf")
    c.setFillColorRGB(0, 0, 0)
    c.rect(100, 200, 50, 4, stroke=0, fill=1)
    c.showPage()
    c.save()
    doc = PdfDocument((tmp_path / "t.pdf").read_bytes())
    paths = [ev for ev in interpret_page(doc.page(0)) if isinstance(ev, PathDraw)]
    assert any(
        ev.rect == pytest.approx((100, 200, 150, 204)) and not ev.stroke
        for ev in paths
    )


def test_image_event_geometry(tmp_path):
    from PIL import Image as PILImage
    from reportlab.lib.utils import ImageReader

    img = PILImage.new("RGB", (20, 10), (255, 0, 0))
    c = make_canvas(tmp_path / "t.pdf")
    c.drawImage(ImageReader(img), 150, 300, width=80, height=40)
    c.showPage()
    c.save()
    doc = PdfDocument((tmp_path / "t.pdf").read_bytes())
    images = [ev for ev in interpret_page(doc.page(0)) if isinstance(ev, ImageDraw)]
    (ev,) = images
    assert ev.rect == pytest.approx((150, 300, 230, 340))
    assert (ev.width_px, ev.height_px) == (20, 10)


def test_word_gap_inserted_for_tj_offsets(tmp_path):
    # Hand-built content: two words separated only by a TJ kern the
    # width of a space, the way TeX justifies lines.
    path = simple_text_pdf(tmp_path / "base.pdf", ["placeholder"])
    data = path.read_bytes()
    new_stream = (
        b"BT /F1 11 Tf 72 700 Td [(Hello) -300 (world)] TJ ET"
    )
    data = replace_content_stream(data, new_stream)
    doc = PdfDocument(data)
    assert page_text(doc) == "Hello world"


def replace_content_stream(data: bytes, new_stream: bytes) -> bytes:
    """Swap the one content stream of an uncompressed fixture PDF and
    rebuild it as an xref-free document our scanner can load."""
    m = re.search(rb"stream\r?\n(.*?)endstream", data, re.S)
    assert m, "fixture has no content stream"
    head = data[: m.start(1)]
    tail = data[m.end(1) :]
    head = re.sub(
        rb"/Length \d+",
        b"/Length " + str(len(new_stream)).encode(),
        head,
    )
    out = head + new_stream + tail
    # Offsets are stale now; drop startxref so the rescue path loads it.
    out = out.replace(b"startxref", b"startxrfX", 1)
    return out


def test_multiline_y_positions_differ(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["first", "second"])
    doc = PdfDocument(path.read_bytes())
    runs = [ev for ev in interpret_page(doc.page(0)) if isinstance(ev, TextRun)]
    assert len(runs) == 2
    y_first = runs[0].glyphs[0].origin[1]
    y_second = runs[1].glyphs[0].origin[1]
    assert y_first > y_second  # PDF y grows upward


# ---------------------------------------------------------------- raster


def test_raster_dimensions_at_150dpi(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["dims"])
    doc = PdfDocument(path.read_bytes())
    buf = render_page(doc.page(0), dpi=150)
    h, w, ch = buf.shape
    assert ch == 3
    assert abs(w - 1240) <= 1 and abs(h - 1754) <= 1


def test_raster_identical_for_identical_pages(tmp_path):
    a = simple_text_pdf(tmp_path / "a.pdf", ["same page"])
    b = simple_text_pdf(tmp_path / "b.pdf", ["same page"])
    da, db = PdfDocument(a.read_bytes()), PdfDocument(b.read_bytes())
    ra = render_page(da.page(0), dpi=96)
    rb = render_page(db.page(0), dpi=96)
    assert (ra == rb).all()


def test_raster_detects_moved_text(tmp_path):
    a = simple_text_pdf(tmp_path / "a.pdf", ["shift detection"])
    c = make_canvas(tmp_path / "b.pdf")
    c.setFont("Helvetica", 11)
    c.drawString(73, 780, "shift detection")  # one point to the right
    c.showPage()
    c.save()
    da = PdfDocument(a.read_bytes())
    db = PdfDocument((tmp_path / "b.pdf").read_bytes())
    ra = render_page(da.page(0), dpi=150)
    rb = render_page(db.page(0), dpi=150)
    assert ra.shape == rb.shape
    assert (ra != rb).any()


def test_raster_blank_page_is_white(tmp_path):
    c = make_canvas(tmp_path / "t.pdf")
    c.showPage()
    c.save()
    doc = PdfDocument((tmp_path / "t.pdf").read_bytes())
    buf = render_page(doc.page(0), dpi=72)
    assert (buf == 255).all()


def test_raster_draws_text_ink_near_baseline(tmp_path):
    path = simple_text_pdf(tmp_path / "t.pdf", ["ink"], size=24)
    doc = PdfDocument(path.read_bytes())
    buf = render_page(doc.page(0), dpi=72)
    ys, xs = np.nonzero((buf != 255).any(axis=2))
    assert len(xs) > 0
    # drawString at (72, 780): ink appears around x=72pt, y=841.89-780 from top
    assert xs.min() == pytest.approx(72, abs=2)
    assert ys.min() == pytest.approx(841.89 - 780 - 24 * 0.718, abs=3)


def test_raster_image_pixels_land(tmp_path):
    from PIL import Image as PILImage
    from reportlab.lib.utils import ImageReader

    img = PILImage.new("RGB", (4, 4), (0, 0, 255))
    c = make_canvas(tmp_path / "t.pdf")
    c.drawImage(ImageReader(img), 100, 100, width=72, height=72)
    c.showPage()
    c.save()
    doc = PdfDocument((tmp_path / "t.pdf").read_bytes())
    buf = render_page(doc.page(0), dpi=72)
    # Page is 841.89pt tall: y=100..172pt from bottom = rows ~670..742.
    patch = buf[680:730, 110:160]
    assert (patch[:, :, 2] > 200).all() and (patch[:, :, 0] < 50).all()
