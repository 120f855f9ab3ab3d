"""Deterministic page rasterisation from interpreted drawing events.

Text renders as glyph-advance boxes in the text colour, images as
their decoded pixels, paths as filled boxes.  Both sides of every
comparison go through this same renderer, so layout differences show
up even though glyph outlines are not drawn.  All arithmetic is plain
numpy and Pillow with fixed rounding, so output is bit-reproducible.
"""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image

from ..errors import PdfParseError
from .content import ImageDraw, PathDraw, TextRun, interpret_page
from .cos import Page, Stream


def _round_px(v: float) -> int:
    return int(math.floor(v + 0.5))


def decode_image_pixels(doc, event: ImageDraw) -> np.ndarray | None:
    """Decode an image draw to an RGB uint8 array, or None if beyond us."""
    if event.stream is not None:
        stream = event.stream
        params = stream.dict
        try:
            data = stream.data(doc)
        except PdfParseError:
            return None
        image_filter = stream.image_filter
    elif event.inline is not None:
        params, raw = event.inline
        filt = params.get("F") or params.get("Filter")
        names = []
        if filt is not None:
            items = filt if isinstance(filt, list) else [filt]
            names = [str(doc.resolve(f)) for f in items]
        from .filters import decode_stream

        try:
            data, image_filter = decode_stream(raw, names, [])
        except PdfParseError:
            return None
    else:
        return None

    resolve = doc.resolve

    def param(*keys, default=None):
        for k in keys:
            if k in params:
                return resolve(params[k])
        return default

    width = int(param("Width", "W", default=0) or 0)
    height = int(param("Height", "H", default=0) or 0)
    if width <= 0 or height <= 0:
        return None

    if image_filter in ("DCTDecode", "DCT", "JPXDecode"):
        try:
            with Image.open(io.BytesIO(data)) as im:
                return np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception:
            return None

    bpc = int(param("BitsPerComponent", "BPC", default=8) or 8)
    mask = bool(param("ImageMask", "IM", default=False))
    space = param("ColorSpace", "CS")

    if mask or (bpc == 1 and space is None):
        row_bytes = (width + 7) // 8
        if len(data) < row_bytes * height:
            return None
        bits = np.unpackbits(
            np.frombuffer(data[: row_bytes * height], dtype=np.uint8).reshape(
                height, row_bytes
            ),
            axis=1,
        )[:, :width]
        # An image mask paints 0 bits; render them black on white.
        gray = np.where(bits == 0, 0, 255).astype(np.uint8)
        return np.stack([gray] * 3, axis=-1)

    comps = 1
    palette = None
    if isinstance(space, list) and space:
        family = str(resolve(space[0]))
        if family in ("Indexed", "I"):
            base = resolve(space[1]) if len(space) > 1 else "DeviceRGB"
            lookup = resolve(space[3]) if len(space) > 3 else b""
            if isinstance(lookup, Stream):
                try:
                    lookup = lookup.data(doc)
                except PdfParseError:
                    return None
            base_comps = 3
            if isinstance(base, list) and base and str(resolve(base[0])) == "ICCBased":
                icc = resolve(base[1]) if len(base) > 1 else None
                if isinstance(icc, Stream):
                    base_comps = int(resolve(icc.dict.get("N", 3)) or 3)
            elif str(base) == "DeviceGray":
                base_comps = 1
            elif str(base) == "DeviceCMYK":
                base_comps = 4
            if isinstance(lookup, bytes):
                entries = len(lookup) // base_comps
                palette = np.zeros((max(entries, 1), 3), dtype=np.uint8)
                arr = np.frombuffer(
                    lookup[: entries * base_comps], dtype=np.uint8
                ).reshape(entries, base_comps)
                if base_comps == 1:
                    palette[:entries] = arr.repeat(3, axis=1)
                elif base_comps >= 3:
                    palette[:entries] = arr[:, :3]
            comps = 1
        elif family == "ICCBased":
            icc = resolve(space[1]) if len(space) > 1 else None
            comps = 3
            if isinstance(icc, Stream):
                comps = int(resolve(icc.dict.get("N", 3)) or 3)
        elif family == "DeviceCMYK":
            comps = 4
        elif family in ("DeviceRGB", "CalRGB"):
            comps = 3
    elif space is not None:
        name = str(space)
        if name in ("DeviceRGB", "CalRGB", "RGB"):
            comps = 3
        elif name in ("DeviceCMYK", "CMYK"):
            comps = 4

    if bpc == 1 and palette is None:
        row_bytes = (width * comps + 7) // 8
        if len(data) < row_bytes * height:
            return None
        bits = np.unpackbits(
            np.frombuffer(data[: row_bytes * height], dtype=np.uint8).reshape(
                height, row_bytes
            ),
            axis=1,
        )[:, : width * comps]
        samples = (bits * 255).astype(np.uint8).reshape(height, width, comps)
    elif bpc == 8:
        need = width * height * comps
        if len(data) < need:
            return None
        samples = np.frombuffer(data[:need], dtype=np.uint8).reshape(
            height, width, comps
        )
        if palette is not None:
            idx = np.clip(samples[:, :, 0], 0, len(palette) - 1)
            return palette[idx]
    elif bpc == 1 and palette is not None:
        row_bytes = (width + 7) // 8
        if len(data) < row_bytes * height:
            return None
        bits = np.unpackbits(
            np.frombuffer(data[: row_bytes * height], dtype=np.uint8).reshape(
                height, row_bytes
            ),
            axis=1,
        )[:, :width]
        idx = np.clip(bits, 0, len(palette) - 1)
        return palette[idx]
    else:
        return None

    if comps == 1:
        return np.repeat(samples, 3, axis=2)
    if comps == 3:
        return np.ascontiguousarray(samples)
    if comps == 4:
        cmyk = samples.astype(np.float32) / 255.0
        k = cmyk[:, :, 3:4]
        rgb = (1.0 - cmyk[:, :, :3]) * (1.0 - k)
        return (rgb * 255.0 + 0.5).astype(np.uint8)
    return None


def _to_rgb255(color: tuple[float, float, float]) -> np.ndarray:
    return np.array(
        [max(0, min(255, _round_px(c * 255.0))) for c in color], dtype=np.uint8
    )


class _Canvas:
    def __init__(self, media_box, dpi: float) -> None:
        x0, y0, x1, y1 = media_box
        self.scale = dpi / 72.0
        self.x0, self.y1 = x0, y1
        self.width = max(1, _round_px((x1 - x0) * self.scale))
        self.height = max(1, _round_px((y1 - y0) * self.scale))
        self.buf = np.full((self.height, self.width, 3), 255, dtype=np.uint8)

    def rect_to_px(self, rect) -> tuple[int, int, int, int] | None:
        rx0, ry0, rx1, ry1 = rect
        px0 = _round_px((rx0 - self.x0) * self.scale)
        px1 = _round_px((rx1 - self.x0) * self.scale)
        py0 = _round_px((self.y1 - ry1) * self.scale)
        py1 = _round_px((self.y1 - ry0) * self.scale)
        px0, px1 = max(0, px0), min(self.width, px1)
        py0, py1 = max(0, py0), min(self.height, py1)
        if px0 >= px1 or py0 >= py1:
            return None
        return px0, py0, px1, py1

    def fill(self, rect, color) -> None:
        box = self.rect_to_px(rect)
        if box:
            x0, y0, x1, y1 = box
            self.buf[y0:y1, x0:x1] = _to_rgb255(color)

    def outline(self, rect, color) -> None:
        box = self.rect_to_px(rect)
        if not box:
            return
        x0, y0, x1, y1 = box
        rgb = _to_rgb255(color)
        self.buf[y0 : y0 + 1, x0:x1] = rgb
        self.buf[y1 - 1 : y1, x0:x1] = rgb
        self.buf[y0:y1, x0 : x0 + 1] = rgb
        self.buf[y0:y1, x1 - 1 : x1] = rgb

    def paste(self, rect, pixels: np.ndarray) -> None:
        box = self.rect_to_px(rect)
        if not box:
            return
        x0, y0, x1, y1 = box
        w, h = x1 - x0, y1 - y0
        im = Image.fromarray(pixels, "RGB").resize((w, h), Image.NEAREST)
        self.buf[y0:y1, x0:x1] = np.asarray(im, dtype=np.uint8)


def render_page(page: Page, dpi: float = 150.0, events: list | None = None) -> np.ndarray:
    """Rasterise one page to an RGB uint8 array of shape (h, w, 3)."""
    if events is None:
        events = interpret_page(page)
    canvas = _Canvas(page.media_box, dpi)
    for event in events:
        if isinstance(event, TextRun):
            for g in event.glyphs:
                if g.space:
                    continue
                canvas.fill(g.rect, event.color)
        elif isinstance(event, PathDraw):
            if event.stroke:
                canvas.outline(event.rect, event.color)
            else:
                canvas.fill(event.rect, event.color)
        elif isinstance(event, ImageDraw):
            pixels = decode_image_pixels(page.doc, event)
            if pixels is None or pixels.size == 0:
                canvas.fill(event.rect, (0.5, 0.5, 0.5))
            else:
                canvas.paste(event.rect, pixels)
    return canvas.buf


def page_is_blank(buf: np.ndarray) -> bool:
    return bool((buf == 255).all())
