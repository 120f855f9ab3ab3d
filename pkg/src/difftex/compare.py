"""Pairwise comparison channels for extracted document layers.

Five signals come out of a pair: pixel equality over sampled pages,
text distance with a reference-zone analysis, font summary deltas,
local-feature similarity, and image placement deltas.  Each signal
carries raw evidence; mapping evidence to difference kinds happens in
the classifier.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .extract import (
    DocumentArtifacts,
    FontSummary,
    ImageInventory,
    NormalizedText,
    PageRaster,
)

DEFAULT_EDIT_CAP = 200_000
DEFAULT_FEATURE_THRESHOLD = 0.7
DEFAULT_IMAGE_DISPLACEMENT_PT = 2.0
REFERENCE_HEADINGS = ("References", "Bibliography", "REFERENCES")


# ------------------------------------------------------------ edit distance


def levenshtein(a: str, b: str, cap: int | None = DEFAULT_EDIT_CAP) -> int:
    """Edit distance between two strings, saturating at ``cap``.

    Two-row dynamic programming with the column recurrence vectorised:
    after the elementwise delete/substitute step, the serial insert
    chain ``curr[j] = min(curr[j], curr[j-1]+1)`` equals
    ``j + running_min(curr0[i] - i)``, which numpy can accumulate.
    """
    if a == b:
        return 0
    # Common affixes never change the distance; stripping them first
    # keeps the DP small for near-identical documents.
    lo = 0
    hi = 0
    max_affix = min(len(a), len(b))
    while lo < max_affix and a[lo] == b[lo]:
        lo += 1
    while hi < max_affix - lo and a[len(a) - 1 - hi] == b[len(b) - 1 - hi]:
        hi += 1
    a = a[lo : len(a) - hi]
    b = b[lo : len(b) - hi]
    if not a or not b:
        dist = max(len(a), len(b))
        return dist if cap is None else min(dist, cap)
    if len(b) > len(a):
        a, b = b, a
    codes = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    n = len(codes)
    idx = np.arange(n + 1, dtype=np.int64)
    prev = idx.copy()
    curr0 = np.empty(n + 1, dtype=np.int64)
    for i, ch in enumerate(a):
        cost = (codes != ord(ch)).astype(np.int64)
        curr0[0] = i + 1
        np.minimum(prev[1:] + 1, prev[:-1] + cost, out=curr0[1:])
        curr = idx + np.minimum.accumulate(curr0 - idx)
        if cap is not None and curr.min() > cap:
            return cap
        prev = curr
    dist = int(prev[-1])
    return dist if cap is None else min(dist, cap)


# ------------------------------------------------------------------ pixels


@dataclass
class PixelSignal:
    page_count_a: int
    page_count_b: int
    pages_compared: list[int]
    differing_pages: list[int]
    diff_ratios: dict[int, float]  # per compared page, fraction of pixels off
    identical: bool


def pixel_compare(
    rasters_a: list[PageRaster],
    page_count_a: int,
    rasters_b: list[PageRaster],
    page_count_b: int,
    tolerance: int = 0,
) -> PixelSignal:
    """Compare sampled page rasters pixel by pixel.

    Pages whose dimensions disagree count as fully different (ratio
    1.0).  ``identical`` additionally requires equal page counts.
    """
    by_index_a = {r.page_index: r for r in rasters_a}
    by_index_b = {r.page_index: r for r in rasters_b}
    common = sorted(set(by_index_a) & set(by_index_b))
    differing = []
    ratios: dict[int, float] = {}
    for index in common:
        a, b = by_index_a[index], by_index_b[index]
        if a.buffer.shape != b.buffer.shape:
            ratios[index] = 1.0
            differing.append(index)
            continue
        if tolerance <= 0:
            mask = (a.buffer != b.buffer).any(axis=2)
        else:
            delta = np.abs(
                a.buffer.astype(np.int16) - b.buffer.astype(np.int16)
            )
            mask = (delta > tolerance).any(axis=2)
        off = int(mask.sum())
        ratios[index] = off / mask.size if mask.size else 0.0
        if off:
            differing.append(index)
    return PixelSignal(
        page_count_a=page_count_a,
        page_count_b=page_count_b,
        pages_compared=common,
        differing_pages=differing,
        diff_ratios=ratios,
        identical=(page_count_a == page_count_b) and not differing,
    )


# -------------------------------------------------------------------- text


@dataclass
class TextSignal:
    identical: bool
    edit_distance: int  # break-insensitive, saturating at cap
    cap: int
    char_count_a: int
    char_count_b: int
    unique_only_a: frozenset[str]
    unique_only_b: frozenset[str]
    line_seq_equal: bool
    # Reference-zone analysis: the document tail after the last
    # bibliography heading, versus everything before it.
    ref_heading_found_a: bool
    ref_heading_found_b: bool
    prefix_edit_distance: int
    suffix_equal: bool
    prefix_char_count_a: int
    prefix_char_count_b: int
    prefix_unique_only_a: frozenset[str]
    prefix_unique_only_b: frozenset[str]


_REF_LINE_RES = [
    re.compile(r"^[\dIVXLC.\s]*" + re.escape(h) + r"\s*$") for h in REFERENCE_HEADINGS
]


def _ref_split(lines: list[str]) -> int | None:
    """Index of the last line that is a bibliography heading."""
    for i in range(len(lines) - 1, -1, -1):
        if any(rx.match(lines[i]) for rx in _REF_LINE_RES):
            return i
    return None


def _flow(s: str) -> str:
    """Collapse line breaks to spaces for break-insensitive distances.

    Rewrapping the same words over different lines then measures zero,
    which is what lets rewrap be told apart from rewritten text."""
    return s.replace("\n", " ")


def text_compare(
    a: NormalizedText, b: NormalizedText, cap: int = DEFAULT_EDIT_CAP
) -> TextSignal:
    lines_a, lines_b = a.lines, b.lines
    edit = levenshtein(_flow(a.flattened), _flow(b.flattened), cap)
    split_a, split_b = _ref_split(lines_a), _ref_split(lines_b)
    found_a, found_b = split_a is not None, split_b is not None
    if found_a and found_b:
        prefix_a = "\n".join(lines_a[:split_a])
        prefix_b = "\n".join(lines_b[:split_b])
        suffix_a = "\n".join(lines_a[split_a + 1 :])
        suffix_b = "\n".join(lines_b[split_b + 1 :])
        prefix_edit = levenshtein(_flow(prefix_a), _flow(prefix_b), cap)
        suffix_equal = _flow(suffix_a) == _flow(suffix_b)
        p_uniq_a = frozenset(prefix_a) - frozenset(prefix_b) - {"\n"}
        p_uniq_b = frozenset(prefix_b) - frozenset(prefix_a) - {"\n"}
        p_count_a, p_count_b = len(prefix_a), len(prefix_b)
    else:
        prefix_edit = edit
        suffix_equal = found_a == found_b
        p_uniq_a = a.unique_chars - b.unique_chars
        p_uniq_b = b.unique_chars - a.unique_chars
        p_count_a, p_count_b = a.char_count, b.char_count
    return TextSignal(
        identical=a.flattened == b.flattened,
        edit_distance=edit,
        cap=cap,
        char_count_a=a.char_count,
        char_count_b=b.char_count,
        unique_only_a=a.unique_chars - b.unique_chars,
        unique_only_b=b.unique_chars - a.unique_chars,
        line_seq_equal=lines_a == lines_b,
        ref_heading_found_a=found_a,
        ref_heading_found_b=found_b,
        prefix_edit_distance=prefix_edit,
        suffix_equal=suffix_equal,
        prefix_char_count_a=p_count_a,
        prefix_char_count_b=p_count_b,
        prefix_unique_only_a=p_uniq_a,
        prefix_unique_only_b=p_uniq_b,
    )


# -------------------------------------------------------------------- fonts


@dataclass
class FontSignal:
    count_a: int
    count_b: int
    count_delta: int  # b minus a
    names_only_a: tuple[str, ...]
    names_only_b: tuple[str, ...]
    size_only_a: frozenset[float]
    size_only_b: frozenset[float]
    color_only_a: frozenset[tuple[int, int, int]]
    color_only_b: frozenset[tuple[int, int, int]]
    identical: bool

    @property
    def any_difference(self) -> bool:
        return not self.identical


def font_compare(a: FontSummary, b: FontSummary) -> FontSignal:
    names_a, names_b = Counter(a.names), Counter(b.names)
    only_a = tuple(sorted((names_a - names_b).elements()))
    only_b = tuple(sorted((names_b - names_a).elements()))
    size_only_a = a.size_set - b.size_set
    size_only_b = b.size_set - a.size_set
    color_only_a = a.color_set - b.color_set
    color_only_b = b.color_set - a.color_set
    identical = (
        a.count == b.count
        and not only_a
        and not only_b
        and not size_only_a
        and not size_only_b
        and not color_only_a
        and not color_only_b
    )
    return FontSignal(
        count_a=a.count,
        count_b=b.count,
        count_delta=b.count - a.count,
        names_only_a=only_a,
        names_only_b=only_b,
        size_only_a=size_only_a,
        size_only_b=size_only_b,
        color_only_a=color_only_a,
        color_only_b=color_only_b,
        identical=identical,
    )


# ----------------------------------------------------------------- features


@dataclass
class FeatureSignal:
    page_scores: list[tuple[int, float]]
    min_score: float  # 1.0 when nothing was compared
    threshold: float

    @property
    def below_threshold(self) -> bool:
        return self.min_score < self.threshold


def _page_blank(buf: np.ndarray) -> bool:
    return bool((buf == 255).all())


def _sift_score(buf_a: np.ndarray, buf_b: np.ndarray) -> float:
    import cv2

    gray_a = cv2.cvtColor(buf_a, cv2.COLOR_RGB2GRAY)
    gray_b = cv2.cvtColor(buf_b, cv2.COLOR_RGB2GRAY)
    sift = cv2.SIFT_create()
    kp_a, desc_a = sift.detectAndCompute(gray_a, None)
    kp_b, desc_b = sift.detectAndCompute(gray_b, None)
    smaller = min(len(kp_a), len(kp_b))
    if smaller == 0:
        return 1.0 if len(kp_a) == len(kp_b) else 0.0
    if len(kp_a) < 2 or len(kp_b) < 2:
        return 1.0 if len(kp_a) == len(kp_b) else 0.0
    matcher = cv2.BFMatcher()
    matches = matcher.knnMatch(desc_a, desc_b, k=2)
    good = 0
    for pair in matches:
        if len(pair) == 2 and pair[0].distance < 0.75 * pair[1].distance:
            good += 1
    return max(0.0, min(1.0, good / smaller))


def feature_compare(
    rasters_a: list[PageRaster],
    rasters_b: list[PageRaster],
    threshold: float = DEFAULT_FEATURE_THRESHOLD,
) -> FeatureSignal:
    """Local-feature similarity per sampled page.

    Byte-identical rasters score 1.0 without running the detector, so
    self-comparison is exactly 1.0.  A blank page against a blank page
    scores 1.0; blank against non-blank scores 0.0.
    """
    by_index_a = {r.page_index: r for r in rasters_a}
    by_index_b = {r.page_index: r for r in rasters_b}
    scores: list[tuple[int, float]] = []
    for index in sorted(set(by_index_a) & set(by_index_b)):
        a, b = by_index_a[index], by_index_b[index]
        if a.buffer.shape == b.buffer.shape and (a.buffer == b.buffer).all():
            scores.append((index, 1.0))
            continue
        blank_a, blank_b = _page_blank(a.buffer), _page_blank(b.buffer)
        if blank_a or blank_b:
            scores.append((index, 1.0 if blank_a and blank_b else 0.0))
            continue
        scores.append((index, _sift_score(a.buffer, b.buffer)))
    min_score = min((s for _, s in scores), default=1.0)
    return FeatureSignal(page_scores=scores, min_score=min_score, threshold=threshold)


# ------------------------------------------------------------------- images


@dataclass
class ImageSignal:
    count_a: int
    count_b: int
    count_mismatch: bool  # totals differ or any page's count differs
    max_displacement: float  # points, over order-matched images
    dims_mismatch: bool
    identical: bool


def image_compare(
    a: ImageInventory, b: ImageInventory, displacement_threshold: float = DEFAULT_IMAGE_DISPLACEMENT_PT
) -> ImageSignal:
    count_mismatch = a.total != b.total
    max_disp = 0.0
    dims_mismatch = False
    pages = max(len(a.pages), len(b.pages))
    for i in range(pages):
        page_a = a.pages[i] if i < len(a.pages) else []
        page_b = b.pages[i] if i < len(b.pages) else []
        if len(page_a) != len(page_b):
            count_mismatch = True
        for pa, pb in zip(page_a, page_b):
            disp = max(abs(ca - cb) for ca, cb in zip(pa.bbox, pb.bbox))
            max_disp = max(max_disp, disp)
            if (pa.width_px, pa.height_px) != (pb.width_px, pb.height_px):
                dims_mismatch = True
    identical = (
        not count_mismatch and not dims_mismatch and max_disp <= displacement_threshold
    )
    return ImageSignal(
        count_a=a.total,
        count_b=b.total,
        count_mismatch=count_mismatch,
        max_displacement=max_disp,
        dims_mismatch=dims_mismatch,
        identical=identical,
    )


# ------------------------------------------------------------------- bundle


@dataclass
class PairwiseComparison:
    pixel: PixelSignal
    text: TextSignal
    font: FontSignal
    feature: FeatureSignal
    image: ImageSignal


def compare_pair(
    a: DocumentArtifacts,
    b: DocumentArtifacts,
    edit_cap: int = DEFAULT_EDIT_CAP,
    feature_threshold: float = DEFAULT_FEATURE_THRESHOLD,
    image_displacement_pt: float = DEFAULT_IMAGE_DISPLACEMENT_PT,
    pixel_tolerance: int = 0,
) -> PairwiseComparison:
    """Run every channel over two documents' extracted layers."""
    return PairwiseComparison(
        pixel=pixel_compare(
            a.rasters, a.page_count, b.rasters, b.page_count, pixel_tolerance
        ),
        text=text_compare(a.normalized, b.normalized, edit_cap),
        font=font_compare(a.fonts, b.fonts),
        feature=feature_compare(a.rasters, b.rasters, feature_threshold),
        image=image_compare(a.images, b.images, image_displacement_pt),
    )
