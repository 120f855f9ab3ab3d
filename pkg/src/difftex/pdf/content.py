"""Content stream interpretation.

Walks a page's operators and emits drawing events in stream order:
text runs (per show operator, with per-glyph boxes), image placements,
and filled or stroked path bounding boxes.  Transforms are tracked
fully; painting geometry is reduced to axis-aligned boxes, which is
what the downstream comparison channels consume.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..errors import PdfParseError
from .cos import Lexer, Name, Page, Ref, Stream
from .fonts import LoadedFont, load_font

Matrix = tuple[float, float, float, float, float, float]
IDENTITY: Matrix = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

# A forward jump at least this many ems wide reads as a word gap.
WORD_GAP_EM = 0.2

MAX_FORM_DEPTH = 8

OPERATOR_RE = re.compile(rb"[^\x00\t\n\x0c\r ()<>\[\]{}/%]+")


def mat_mul(m1: Matrix, m2: Matrix) -> Matrix:
    a1, b1, c1, d1, e1, f1 = m1
    a2, b2, c2, d2, e2, f2 = m2
    return (
        a1 * a2 + b1 * c2,
        a1 * b2 + b1 * d2,
        c1 * a2 + d1 * c2,
        c1 * b2 + d1 * d2,
        e1 * a2 + f1 * c2 + e2,
        e1 * b2 + f1 * d2 + f2,
    )


def mat_apply(m: Matrix, x: float, y: float) -> tuple[float, float]:
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


def _corner_bbox(m: Matrix, x0, y0, x1, y1) -> tuple[float, float, float, float]:
    pts = [mat_apply(m, x, y) for x, y in ((x0, y0), (x1, y0), (x0, y1), (x1, y1))]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return (min(xs), min(ys), max(xs), max(ys))


@dataclass
class GlyphBox:
    char: str
    rect: tuple[float, float, float, float]  # page space ink box
    origin: tuple[float, float]  # baseline origin, page space
    space: bool  # no ink (space or synthetic word gap)


@dataclass
class TextRun:
    glyphs: list[GlyphBox]
    font_id: tuple
    base_font: str
    size: float  # effective size in points after all transforms
    color: tuple[float, float, float]

    @property
    def text(self) -> str:
        return "".join(g.char for g in self.glyphs)


@dataclass
class ImageDraw:
    rect: tuple[float, float, float, float]  # page space placement
    width_px: int
    height_px: int
    stream: Stream | None = None  # XObject; None for inline images
    inline: tuple[dict, bytes] | None = None


@dataclass
class PathDraw:
    rect: tuple[float, float, float, float]
    color: tuple[float, float, float]
    stroke: bool  # outline only, not a filled area


@dataclass
class _GState:
    ctm: Matrix = IDENTITY
    fill: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stroke: tuple[float, float, float] = (0.0, 0.0, 0.0)
    clip: tuple[float, float, float, float] | None = None
    fill_comps: int = 1
    stroke_comps: int = 1

    def copy(self) -> "_GState":
        return _GState(self.ctm, self.fill, self.stroke, self.clip, self.fill_comps, self.stroke_comps)


@dataclass
class _TState:
    # Text state survives across BT/ET blocks.
    char_spacing: float = 0.0
    word_spacing: float = 0.0
    hscale: float = 1.0
    leading: float = 0.0
    size: float = 0.0
    font: LoadedFont | None = None
    rise: float = 0.0
    render_mode: int = 0


def _cmyk_to_rgb(c, m, y, k):
    return ((1 - c) * (1 - k), (1 - m) * (1 - k), (1 - y) * (1 - k))


def _color_from_components(comps: list[float]) -> tuple[float, float, float]:
    if len(comps) == 1:
        g = comps[0]
        return (g, g, g)
    if len(comps) == 3:
        return tuple(comps)  # type: ignore[return-value]
    if len(comps) == 4:
        return _cmyk_to_rgb(*comps)
    return (0.0, 0.0, 0.0)


def _clip_rect(rect, clip):
    if clip is None:
        return rect
    x0 = max(rect[0], clip[0])
    y0 = max(rect[1], clip[1])
    x1 = min(rect[2], clip[2])
    y1 = min(rect[3], clip[3])
    if x0 >= x1 or y0 >= y1:
        return None
    return (x0, y0, x1, y1)


class _Interpreter:
    def __init__(self, page: Page) -> None:
        self.doc = page.doc
        self.page = page
        self.events: list = []
        self.gs = _GState()
        self.ts = _TState()
        self._gs_stack: list[_GState] = []
        self._fonts: dict[tuple, LoadedFont] = {}
        self._tm: Matrix = IDENTITY
        self._tlm: Matrix = IDENTITY
        self._path_rects: list[tuple[float, float, float, float]] = []
        self._path_points: list[tuple[float, float]] = []
        self._pending_clip = False
        self._run: TextRun | None = None

    # ------------------------------------------------------- resources

    def _lookup(self, resources: dict, category: str, name: str):
        table = self.doc.resolve(resources.get(category))
        if isinstance(table, dict) and name in table:
            return table[name]
        return None

    def _font_for(self, resources: dict, name: str) -> LoadedFont | None:
        entry = self._lookup(resources, "Font", name)
        if entry is None:
            return None
        key = (
            ("ref", entry.num, entry.gen)
            if isinstance(entry, Ref)
            else ("name", id(resources), name)
        )
        if key not in self._fonts:
            self._fonts[key] = load_font(self.doc, entry, name)
        return self._fonts[key]

    # ------------------------------------------------------------ text

    def _flush_run(self) -> None:
        if self._run is not None and self._run.glyphs:
            self.events.append(self._run)
        self._run = None

    def _begin_run(self) -> None:
        font = self.ts.font
        if font is None:
            self._run = None
            return
        m = mat_mul(self._tm, self.gs.ctm)
        size_eff = self.ts.size * math.hypot(m[2], m[3])
        self._run = TextRun(
            glyphs=[],
            font_id=font.identity,
            base_font=font.base_font,
            size=size_eff,
            color=self.gs.fill,
        )

    def _show(self, raw: bytes) -> None:
        font = self.ts.font
        if font is None or not isinstance(raw, bytes):
            return
        if self._run is None:
            self._begin_run()
        if self._run is None:
            return
        fs, th, rise = self.ts.size, self.ts.hscale, self.ts.rise
        invisible = self.ts.render_mode == 3
        for g in font.decode(raw):
            m = mat_mul(self._tm, self.gs.ctm)
            origin = mat_apply(m, 0.0, rise)
            rect = _corner_bbox(
                m,
                0.0,
                rise + font.descent * fs,
                g.width * fs * th,
                rise + font.ascent * fs,
            )
            no_ink = g.is_space or invisible
            self._run.glyphs.append(GlyphBox(g.char, rect, origin, no_ink))
            adv = (g.width * fs + self.ts.char_spacing) * th
            if g.is_word_boundary_code:
                adv += self.ts.word_spacing * th
            self._tm = mat_mul((1, 0, 0, 1, adv, 0), self._tm)

    def _tj_adjust(self, amount: float) -> None:
        # Positive TJ numbers move the pen left by amount/1000 em.
        shift_em = -amount / 1000.0
        fs, th = self.ts.size, self.ts.hscale
        if shift_em >= WORD_GAP_EM and self._run is not None:
            m = mat_mul(self._tm, self.gs.ctm)
            origin = mat_apply(m, 0.0, self.ts.rise)
            rect = _corner_bbox(m, 0.0, 0.0, shift_em * fs * th, 0.0)
            self._run.glyphs.append(GlyphBox(" ", rect, origin, True))
        self._tm = mat_mul((1, 0, 0, 1, shift_em * fs * th, 0), self._tm)

    def _newline(self, tx: float, ty: float) -> None:
        self._flush_run()
        self._tlm = mat_mul((1, 0, 0, 1, tx, ty), self._tlm)
        self._tm = self._tlm

    # ------------------------------------------------------------ paths

    def _paint_path(self, fill: bool, stroke: bool) -> None:
        rects = list(self._path_rects)
        if self._path_points:
            xs = [p[0] for p in self._path_points]
            ys = [p[1] for p in self._path_points]
            rects.append((min(xs), min(ys), max(xs), max(ys)))
        for rect in rects:
            clipped = _clip_rect(rect, self.gs.clip)
            if clipped is None:
                continue
            color = self.gs.fill if fill else self.gs.stroke
            self.events.append(PathDraw(clipped, color, stroke and not fill))
        self._end_path()

    def _end_path(self) -> None:
        if self._pending_clip:
            rects = list(self._path_rects)
            if self._path_points:
                xs = [p[0] for p in self._path_points]
                ys = [p[1] for p in self._path_points]
                rects.append((min(xs), min(ys), max(xs), max(ys)))
            if rects:
                x0 = min(r[0] for r in rects)
                y0 = min(r[1] for r in rects)
                x1 = max(r[2] for r in rects)
                y1 = max(r[3] for r in rects)
                new_clip = (x0, y0, x1, y1)
                merged = _clip_rect(new_clip, self.gs.clip)
                self.gs.clip = merged if merged else (0.0, 0.0, 0.0, 0.0)
            self._pending_clip = False
        self._path_rects = []
        self._path_points = []

    # ---------------------------------------------------------- xobjects

    def _do_xobject(self, resources: dict, name: str, depth: int) -> None:
        entry = self._lookup(resources, "XObject", name)
        xobj = self.doc.resolve(entry)
        if not isinstance(xobj, Stream):
            return
        subtype = str(self.doc.resolve(xobj.dict.get("Subtype", "")) or "")
        if subtype == "Image":
            rect = _corner_bbox(self.gs.ctm, 0.0, 0.0, 1.0, 1.0)
            clipped = _clip_rect(rect, self.gs.clip)
            if clipped is None:
                return
            w = int(self.doc.resolve(xobj.dict.get("Width", 0)) or 0)
            h = int(self.doc.resolve(xobj.dict.get("Height", 0)) or 0)
            self.events.append(ImageDraw(clipped, w, h, stream=xobj))
            return
        if subtype == "Form" and depth < MAX_FORM_DEPTH:
            saved_gs = self.gs.copy()
            saved_stack = self._gs_stack
            self._gs_stack = []
            matrix = self.doc.resolve(xobj.dict.get("Matrix"))
            if isinstance(matrix, list) and len(matrix) == 6:
                form_m = tuple(float(self.doc.resolve(v)) for v in matrix)
                self.gs.ctm = mat_mul(form_m, self.gs.ctm)
            bbox = self.doc.resolve(xobj.dict.get("BBox"))
            if isinstance(bbox, list) and len(bbox) == 4:
                vals = [float(self.doc.resolve(v)) for v in bbox]
                frame = _corner_bbox(
                    self.gs.ctm,
                    min(vals[0], vals[2]),
                    min(vals[1], vals[3]),
                    max(vals[0], vals[2]),
                    max(vals[1], vals[3]),
                )
                merged = _clip_rect(frame, self.gs.clip)
                self.gs.clip = merged if merged else (0.0, 0.0, 0.0, 0.0)
            inner_res = self.doc.resolve(xobj.dict.get("Resources"))
            if not isinstance(inner_res, dict):
                inner_res = resources
            try:
                data = xobj.data(self.doc)
            except PdfParseError:
                data = b""
            self._execute(data, inner_res, depth + 1)
            self._flush_run()
            self.gs = saved_gs
            self._gs_stack = saved_stack

    # ------------------------------------------------------ inline image

    def _inline_image(self, lex: Lexer) -> None:
        params: dict = {}
        while True:
            lex.skip_ws()
            if lex.data.startswith(b"ID", lex.pos):
                lex.pos += 2
                break
            if lex.pos >= len(lex.data):
                return
            key = lex.parse_object()
            if not isinstance(key, Name):
                return
            params[str(key)] = lex.parse_object()
        if lex.pos < len(lex.data) and lex.data[lex.pos] in b"\x00\t\n\x0c\r ":
            lex.pos += 1
        search = lex.pos
        end = -1
        while True:
            cand = lex.data.find(b"EI", search)
            if cand == -1:
                end = len(lex.data)
                break
            before_ok = cand == 0 or lex.data[cand - 1] in b"\x00\t\n\x0c\r "
            after = lex.data[cand + 2 : cand + 3]
            after_ok = after == b"" or after[0] in b"\x00\t\n\x0c\r /[<("
            if before_ok and after_ok:
                end = cand
                break
            search = cand + 2
        payload = lex.data[lex.pos : end].rstrip(b"\x00\t\n\x0c\r ")
        lex.pos = min(end + 2, len(lex.data))
        rect = _corner_bbox(self.gs.ctm, 0.0, 0.0, 1.0, 1.0)
        clipped = _clip_rect(rect, self.gs.clip)
        if clipped is None:
            return
        w = int(self.doc.resolve(params.get("W") or params.get("Width") or 0) or 0)
        h = int(self.doc.resolve(params.get("H") or params.get("Height") or 0) or 0)
        self.events.append(ImageDraw(clipped, w, h, inline=(params, payload)))

    # --------------------------------------------------------- executor

    def _execute(self, data: bytes, resources: dict, depth: int = 0) -> None:
        lex = Lexer(data)
        operands: list = []
        n = len(data)
        while True:
            lex.skip_ws()
            if lex.pos >= n:
                break
            c = data[lex.pos]
            if c in b"/(<[" or c in b"+-.0123456789":
                try:
                    operands.append(lex.parse_object())
                except PdfParseError:
                    lex.pos += 1
                continue
            m = OPERATOR_RE.match(data, lex.pos)
            if not m:
                lex.pos += 1
                continue
            op = m.group(0)
            lex.pos = m.end()
            if op == b"true":
                operands.append(True)
                continue
            if op == b"false":
                operands.append(False)
                continue
            if op == b"null":
                operands.append(None)
                continue
            if op == b"BI":
                self._inline_image(lex)
                operands = []
                continue
            self._apply(op, operands, resources, depth)
            operands = []

    def _num(self, operands, count) -> list[float]:
        vals = []
        for v in operands[-count:] if count else []:
            vals.append(float(v) if isinstance(v, (int, float)) else 0.0)
        while len(vals) < count:
            vals.insert(0, 0.0)
        return vals

    def _apply(self, op: bytes, operands: list, resources: dict, depth: int) -> None:
        gs, ts = self.gs, self.ts
        if op == b"q":
            self._gs_stack.append(gs.copy())
        elif op == b"Q":
            if self._gs_stack:
                self._flush_run()
                self.gs = self._gs_stack.pop()
        elif op == b"cm":
            a, b, c, d, e, f = self._num(operands, 6)
            self._flush_run()
            gs.ctm = mat_mul((a, b, c, d, e, f), gs.ctm)
        elif op == b"BT":
            self._flush_run()
            self._tm = self._tlm = IDENTITY
        elif op == b"ET":
            self._flush_run()
        elif op == b"Tf":
            self._flush_run()
            if len(operands) >= 2 and isinstance(operands[-2], (Name, str)):
                ts.font = self._font_for(resources, str(operands[-2]))
                ts.size = float(operands[-1]) if isinstance(operands[-1], (int, float)) else 0.0
        elif op == b"Td":
            tx, ty = self._num(operands, 2)
            self._newline(tx, ty)
        elif op == b"TD":
            tx, ty = self._num(operands, 2)
            ts.leading = -ty
            self._newline(tx, ty)
        elif op == b"Tm":
            self._flush_run()
            a, b, c, d, e, f = self._num(operands, 6)
            self._tm = self._tlm = (a, b, c, d, e, f)
        elif op == b"T*":
            self._newline(0.0, -ts.leading)
        elif op == b"TL":
            (ts.leading,) = self._num(operands, 1)
        elif op == b"Tc":
            (ts.char_spacing,) = self._num(operands, 1)
        elif op == b"Tw":
            (ts.word_spacing,) = self._num(operands, 1)
        elif op == b"Tz":
            (scale,) = self._num(operands, 1)
            ts.hscale = scale / 100.0
        elif op == b"Ts":
            (ts.rise,) = self._num(operands, 1)
        elif op == b"Tr":
            (mode,) = self._num(operands, 1)
            ts.render_mode = int(mode)
        elif op == b"Tj":
            if operands and isinstance(operands[-1], bytes):
                self._show(operands[-1])
        elif op == b"TJ":
            if operands and isinstance(operands[-1], list):
                if self._run is None:
                    self._begin_run()
                for item in operands[-1]:
                    if isinstance(item, bytes):
                        self._show(item)
                    elif isinstance(item, (int, float)):
                        self._tj_adjust(float(item))
        elif op == b"'":
            self._newline(0.0, -ts.leading)
            if operands and isinstance(operands[-1], bytes):
                self._show(operands[-1])
        elif op == b'"':
            if len(operands) >= 3:
                aw, ac = self._num(operands[:-1], 2)
                ts.word_spacing, ts.char_spacing = aw, ac
            self._newline(0.0, -ts.leading)
            if operands and isinstance(operands[-1], bytes):
                self._show(operands[-1])
        elif op == b"re":
            x, y, w, h = self._num(operands, 4)
            self._path_rects.append(
                _corner_bbox(gs.ctm, x, y, x + w, y + h)
            )
            self._path_points.extend(
                [mat_apply(gs.ctm, x, y), mat_apply(gs.ctm, x + w, y + h)]
            )
        elif op in (b"m", b"l"):
            x, y = self._num(operands, 2)
            self._path_points.append(mat_apply(gs.ctm, x, y))
        elif op == b"c":
            vals = self._num(operands, 6)
            for i in (0, 2, 4):
                self._path_points.append(mat_apply(gs.ctm, vals[i], vals[i + 1]))
        elif op in (b"v", b"y"):
            vals = self._num(operands, 4)
            for i in (0, 2):
                self._path_points.append(mat_apply(gs.ctm, vals[i], vals[i + 1]))
        elif op == b"h":
            pass
        elif op in (b"f", b"F", b"f*"):
            self._paint_path(fill=True, stroke=False)
        elif op in (b"B", b"B*", b"b", b"b*"):
            self._paint_path(fill=True, stroke=True)
        elif op in (b"S", b"s"):
            self._paint_path(fill=False, stroke=True)
        elif op == b"n":
            self._end_path()
        elif op in (b"W", b"W*"):
            self._pending_clip = True
        elif op == b"g":
            (v,) = self._num(operands, 1)
            self._flush_run()
            gs.fill = (v, v, v)
        elif op == b"G":
            (v,) = self._num(operands, 1)
            gs.stroke = (v, v, v)
        elif op == b"rg":
            self._flush_run()
            gs.fill = tuple(self._num(operands, 3))  # type: ignore[assignment]
        elif op == b"RG":
            gs.stroke = tuple(self._num(operands, 3))  # type: ignore[assignment]
        elif op == b"k":
            self._flush_run()
            gs.fill = _cmyk_to_rgb(*self._num(operands, 4))
        elif op == b"K":
            gs.stroke = _cmyk_to_rgb(*self._num(operands, 4))
        elif op in (b"cs", b"CS"):
            comps = 1
            if operands and isinstance(operands[-1], (Name, str)):
                name = str(operands[-1])
                if name in ("DeviceRGB", "CalRGB", "Lab"):
                    comps = 3
                elif name == "DeviceCMYK":
                    comps = 4
                else:
                    space = self.doc.resolve(
                        self._lookup(resources, "ColorSpace", name)
                    )
                    if isinstance(space, list) and space:
                        family = str(self.doc.resolve(space[0]))
                        if family == "ICCBased" and len(space) > 1:
                            icc = self.doc.resolve(space[1])
                            if isinstance(icc, Stream):
                                comps = int(
                                    self.doc.resolve(icc.dict.get("N", 1)) or 1
                                )
                        elif family in ("CalRGB", "Lab"):
                            comps = 3
                        elif family == "DeviceCMYK":
                            comps = 4
            if op == b"cs":
                gs.fill_comps = comps
            else:
                gs.stroke_comps = comps
        elif op in (b"sc", b"scn", b"SC", b"SCN"):
            numeric = [v for v in operands if isinstance(v, (int, float))]
            color = _color_from_components([float(v) for v in numeric]) if numeric else (0.0, 0.0, 0.0)
            if op in (b"sc", b"scn"):
                self._flush_run()
                gs.fill = color
            else:
                gs.stroke = color
        elif op == b"Do":
            if operands and isinstance(operands[-1], (Name, str)):
                self._flush_run()
                self._do_xobject(resources, str(operands[-1]), depth)
        # Remaining operators (gs, sh, d0/d1, marked content, line style)
        # do not affect the comparison channels.

    def run(self) -> list:
        try:
            data = self.page.content_bytes()
        except PdfParseError:
            data = b""
        self._execute(data, self.page.resources)
        self._flush_run()
        return self.events


def interpret_page(page: Page) -> list:
    """All drawing events of one page, in content order."""
    return _Interpreter(page).run()
