"""Extraction layers: page selection, rasters, text, fonts, images."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difftex.errors import PageOutOfRange
from difftex.extract import (
    NormalizeOptions,
    TextLayer,
    extract_all,
    normalize_text,
    select_pages,
)
from difftex.pdf import PdfDocument

from pdfgen import make_canvas, multi_page_pdf, simple_text_pdf


# ----------------------------------------------------------- page selection


def test_select_pages_small_docs():
    assert select_pages(0) == []
    assert select_pages(1) == [0]
    assert select_pages(3) == [0, 1, 2]
    assert select_pages(6) == [0, 1, 2, 3, 4, 5]


def test_select_pages_large_doc_takes_edges():
    assert select_pages(10) == [0, 1, 2, 7, 8, 9]
    assert select_pages(7) == [0, 1, 2, 4, 5, 6]
    assert select_pages(4, edge_pages=1) == [0, 3]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 500), st.integers(1, 5))
def test_select_pages_properties(n, k):
    pages = select_pages(n, k)
    assert pages == sorted(set(pages))
    assert all(0 <= p < n for p in pages)
    assert len(pages) == min(n, 2 * k) or len(pages) == min(n, 2 * k - (2 * k - n))


# ------------------------------------------------------------ normalisation


def test_normalize_collapses_whitespace_and_empties():
    layer = TextLayer(pages=[["a   b\tc", "   ", "", "d  e"]])
    out = normalize_text(layer)
    assert out.pages == [["a b c", "d e"]]
    assert out.flattened == "a b c\nd e"
    assert out.char_count == len("a b c\nd e")


def test_normalize_expands_ligatures_but_not_quotes():
    layer = TextLayer(pages=[["ﬁle ﬂy ﬀ ﬃx ﬄuid"]])
    out = normalize_text(layer)
    assert out.pages == [["file fly ff ffix ffluid"]]
    curly = TextLayer(pages=[["“quoted” ‘single’"]])
    # Quote styles are content differences and survive normalisation.
    assert normalize_text(curly).flattened == "“quoted” ‘single’"


def test_normalize_composes_accent_pairs():
    # Combining accent written before its base, as accent-primitive
    # output extracts it.
    layer = TextLayer(pages=[["caf́e and caf´e"]])
    out = normalize_text(layer)
    assert out.flattened == "café and café"
    # Already precomposed text is untouched.
    assert normalize_text(TextLayer(pages=[["café"]])).flattened == "café"
    # Decomposed base-then-accent also lands on the same form.
    assert normalize_text(TextLayer(pages=[["café"]])).flattened == "café"


def test_normalize_rejoins_attested_hyphenation():
    layer = TextLayer(
        pages=[["we study hyphen-", "ation here because hyphenation matters"]]
    )
    out = normalize_text(layer)
    assert out.pages == [["we study hyphenation", "here because hyphenation matters"]]


def test_normalize_keeps_unattested_hyphen():
    layer = TextLayer(pages=[["a well-", "known issue"]])
    out = normalize_text(layer)
    # "wellknown" appears nowhere unhyphenated, so the break stays.
    assert out.pages == [["a well-", "known issue"]]


def test_normalize_options_toggle():
    layer = TextLayer(pages=[["ﬁle   here", ""]])
    out = normalize_text(
        layer,
        NormalizeOptions(
            expand_ligatures=False, collapse_whitespace=False, drop_empty_lines=False
        ),
    )
    assert out.pages == [["ﬁle   here", ""]]


NORMALIZE_ALPHABET = st.text(
    alphabet="ab c-\n\té́´ﬁﬂe“”",
    max_size=60,
)


@settings(max_examples=300, deadline=None)
@given(st.lists(NORMALIZE_ALPHABET, max_size=6))
def test_normalize_idempotent(lines):
    layer = TextLayer(pages=[lines])
    once = normalize_text(layer)
    again = normalize_text(TextLayer(pages=once.pages))
    assert again.pages == once.pages
    assert again.flattened == once.flattened


def test_normalize_idempotent_on_many_random_strings():
    rng = random.Random(7)
    chars = "abc de-\nfé́´ﬁ \t"
    for _ in range(1000):
        lines = [
            "".join(rng.choice(chars) for _ in range(rng.randrange(30)))
            for _ in range(rng.randrange(4))
        ]
        once = normalize_text(TextLayer(pages=[lines]))
        again = normalize_text(TextLayer(pages=once.pages))
        assert again.pages == once.pages


# -------------------------------------------------------------- full extract


def test_extract_all_layers(tmp_path):
    path = tmp_path / "doc.pdf"
    c = make_canvas(path)
    c.setFont("Helvetica", 11)
    c.drawString(72, 780, "Body text on page one")
    c.setFont("Times-Roman", 9)
    c.setFillColorRGB(0.8, 0.1, 0.1)
    c.drawString(72, 760, "red footnote")
    c.showPage()
    c.setFont("Helvetica", 11)
    c.drawString(72, 780, "Page two text")
    c.showPage()
    c.save()

    art = extract_all(path, dpi=72)
    assert art.page_count == 2
    assert [r.page_index for r in art.rasters] == [0, 1]
    assert "Body text on page one" in art.text.pages[0][0]
    assert "Page two text" in art.text.pages[1][0]
    assert art.fonts.count == 2
    assert art.fonts.names == ("Helvetica", "Times-Roman")
    assert art.fonts.size_set == frozenset({11.0, 9.0})
    assert (204, 26, 26) in art.fonts.color_set
    assert art.images.total == 0
    assert art.normalized.char_count > 0


def test_extract_all_selects_edge_pages(tmp_path):
    path = multi_page_pdf(
        tmp_path / "doc.pdf", [[f"page {i}"] for i in range(10)]
    )
    art = extract_all(path, dpi=72)
    assert [r.page_index for r in art.rasters] == [0, 1, 2, 7, 8, 9]
    assert art.page_count == 10
    assert len(art.text.pages) == 10  # text covers every page


def test_extract_artifact_cache_roundtrip(tmp_path):
    path = simple_text_pdf(tmp_path / "doc.pdf", ["cache me twice"])
    cache = tmp_path / "cache"
    first = extract_all(path, dpi=72, cache_dir=cache)
    entries = list(cache.iterdir())
    assert len(entries) == 1
    second = extract_all(path, dpi=72, cache_dir=cache)
    assert second.source_sha256 == first.source_sha256
    assert second.page_count == first.page_count
    assert second.text.pages == first.text.pages
    assert second.normalized.flattened == first.normalized.flattened
    assert second.fonts == first.fonts
    assert [r.page_index for r in second.rasters] == [
        r.page_index for r in first.rasters
    ]
    assert all(
        (a.buffer == b.buffer).all() for a, b in zip(first.rasters, second.rasters)
    )


def test_extract_cache_distinguishes_dpi(tmp_path):
    path = simple_text_pdf(tmp_path / "doc.pdf", ["dpi matters"])
    cache = tmp_path / "cache"
    low = extract_all(path, dpi=72, cache_dir=cache)
    high = extract_all(path, dpi=150, cache_dir=cache)
    assert len(list(cache.iterdir())) == 2
    assert high.rasters[0].width_px > low.rasters[0].width_px


def test_word_gaps_become_spaces(tmp_path):
    # reportlab's drawString uses explicit space glyphs; textLine via
    # multiple drawString calls at offsets exercises the gap heuristic.
    c = make_canvas(tmp_path / "doc.pdf")
    c.setFont("Courier", 10)
    c.drawString(72, 700, "left")
    c.drawString(110, 700, "right")  # 38pt gap, far beyond 0.2em
    c.showPage()
    c.save()
    art = extract_all(tmp_path / "doc.pdf", dpi=72)
    assert art.text.pages[0] == ["left right"]


def test_separate_baselines_become_lines(tmp_path):
    c = make_canvas(tmp_path / "doc.pdf")
    c.setFont("Helvetica", 11)
    c.drawString(72, 700, "upper")
    c.drawString(72, 650, "lower")
    c.showPage()
    c.save()
    art = extract_all(tmp_path / "doc.pdf", dpi=72)
    assert art.text.pages[0] == ["upper", "lower"]
