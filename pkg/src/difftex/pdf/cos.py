"""COS object model, cross-reference loading, and the page tree.

Handles classic xref tables, xref streams, hybrid files, object
streams, and incremental updates.  When the trailer machinery is
broken the loader falls back to scanning the file for ``N G obj``
headers, which recovers most truncated or hand-edited documents.
Encrypted files are rejected outright.
"""

from __future__ import annotations

import re
from typing import Iterator, NamedTuple

from ..errors import PageOutOfRange, PdfParseError
from .filters import decode_stream

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"
REGULAR_END = WHITESPACE + DELIMITERS

NUMBER_RE = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)")
KEYWORD_RE = re.compile(rb"[A-Za-z][A-Za-z0-9*']*")
OBJ_HEADER_RE = re.compile(rb"(\d{1,10})\s+(\d{1,5})\s+obj\b")


class Name(str):
    """A PDF name; behaves as its string value."""

    __slots__ = ()


class Ref(NamedTuple):
    num: int
    gen: int


class Stream:
    """A stream object: its dictionary plus raw (still encoded) bytes."""

    __slots__ = ("dict", "raw", "_decoded", "_image_filter")

    def __init__(self, sdict: dict, raw: bytes) -> None:
        self.dict = sdict
        self.raw = raw
        self._decoded: bytes | None = None
        self._image_filter: str | None = None

    def _filters(self, doc: "PdfDocument | None") -> tuple[list[str], list[dict]]:
        resolve = doc.resolve if doc else (lambda x: x)
        filt = resolve(self.dict.get("Filter"))
        parms = resolve(self.dict.get("DecodeParms")) or resolve(
            self.dict.get("DP")
        )
        if filt is None:
            filters: list = []
        elif isinstance(filt, list):
            filters = [resolve(f) for f in filt]
        else:
            filters = [filt]
        if parms is None:
            parms_list: list = []
        elif isinstance(parms, list):
            parms_list = [resolve(p) or {} for p in parms]
        else:
            parms_list = [parms]
        return [str(f) for f in filters], parms_list

    def data(self, doc: "PdfDocument | None" = None) -> bytes:
        """Decoded stream content.  DCT/JPX payloads come back raw;
        check ``image_filter`` afterwards."""
        if self._decoded is None:
            filters, parms = self._filters(doc)
            self._decoded, self._image_filter = decode_stream(
                self.raw, filters, parms
            )
        return self._decoded

    @property
    def image_filter(self) -> str | None:
        return self._image_filter


class Lexer:
    """Pulls COS objects out of a byte buffer."""

    def __init__(self, data: bytes, pos: int = 0, resolve=None) -> None:
        self.data = data
        self.pos = pos
        # Length entries can be indirect; the document supplies resolution.
        self.resolve = resolve or (lambda x: x)

    def skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in WHITESPACE:
                self.pos += 1
            elif c == 0x25:  # '%'
                eol = data.find(b"\n", self.pos)
                cr = data.find(b"\r", self.pos)
                if cr != -1 and (eol == -1 or cr < eol):
                    eol = cr
                self.pos = n if eol == -1 else eol
            else:
                return

    def peek_keyword(self) -> bytes | None:
        save = self.pos
        self.skip_ws()
        m = KEYWORD_RE.match(self.data, self.pos)
        self.pos = save
        return m.group(0) if m else None

    def expect_keyword(self, word: bytes) -> None:
        self.skip_ws()
        m = KEYWORD_RE.match(self.data, self.pos)
        if not m or m.group(0) != word:
            raise PdfParseError(
                f"expected {word!r} at offset {self.pos}, found "
                f"{self.data[self.pos:self.pos + 12]!r}"
            )
        self.pos = m.end()

    def _parse_name(self) -> Name:
        self.pos += 1  # '/'
        data = self.data
        out = bytearray()
        while self.pos < len(data):
            c = data[self.pos]
            if c in REGULAR_END:
                break
            if c == 0x23 and self.pos + 2 < len(data):  # '#'
                try:
                    out.append(int(data[self.pos + 1 : self.pos + 3], 16))
                    self.pos += 3
                    continue
                except ValueError:
                    pass
            out.append(c)
            self.pos += 1
        return Name(out.decode("latin-1"))

    def _parse_literal_string(self) -> bytes:
        data = self.data
        self.pos += 1  # '('
        depth = 1
        out = bytearray()
        while self.pos < len(data):
            c = data[self.pos]
            if c == 0x5C:  # backslash
                self.pos += 1
                if self.pos >= len(data):
                    break
                e = data[self.pos]
                if e in b"nrtbf":
                    out.append({0x6E: 10, 0x72: 13, 0x74: 9, 0x62: 8, 0x66: 12}[e])
                    self.pos += 1
                elif e in b"()\\":
                    out.append(e)
                    self.pos += 1
                elif 0x30 <= e <= 0x37:
                    digits = bytearray([e])
                    self.pos += 1
                    while len(digits) < 3 and self.pos < len(data) and 0x30 <= data[self.pos] <= 0x37:
                        digits.append(data[self.pos])
                        self.pos += 1
                    out.append(int(digits, 8) & 0xFF)
                elif e == 0x0D:
                    self.pos += 1
                    if self.pos < len(data) and data[self.pos] == 0x0A:
                        self.pos += 1
                elif e == 0x0A:
                    self.pos += 1
                else:
                    out.append(e)
                    self.pos += 1
            elif c == 0x28:  # '('
                depth += 1
                out.append(c)
                self.pos += 1
            elif c == 0x29:  # ')'
                depth -= 1
                self.pos += 1
                if depth == 0:
                    return bytes(out)
                out.append(c)
            else:
                out.append(c)
                self.pos += 1
        raise PdfParseError("unterminated literal string")

    def _parse_hex_string(self) -> bytes:
        end = self.data.find(b">", self.pos + 1)
        if end == -1:
            raise PdfParseError("unterminated hex string")
        digits = bytes(
            c for c in self.data[self.pos + 1 : end] if c not in WHITESPACE
        )
        self.pos = end + 1
        if len(digits) % 2:
            digits += b"0"
        try:
            return bytes.fromhex(digits.decode("ascii"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise PdfParseError("bad hex string") from exc

    def _parse_number_or_ref(self):
        m = NUMBER_RE.match(self.data, self.pos)
        if not m:
            raise PdfParseError(f"bad token at offset {self.pos}")
        self.pos = m.end()
        text = m.group(0)
        if b"." in text:
            return float(text)
        first = int(text)
        # "N G R" makes an indirect reference; anything else rewinds.
        save = self.pos
        self.skip_ws()
        m2 = NUMBER_RE.match(self.data, self.pos)
        if m2 and b"." not in m2.group(0) and first >= 0:
            self.pos = m2.end()
            self.skip_ws()
            if self.data[self.pos : self.pos + 1] == b"R" and (
                self.pos + 1 >= len(self.data)
                or self.data[self.pos + 1] in REGULAR_END
            ):
                self.pos += 1
                return Ref(first, int(m2.group(0)))
        self.pos = save
        return first

    def _maybe_stream(self, sdict: dict):
        save = self.pos
        self.skip_ws()
        if not self.data.startswith(b"stream", self.pos):
            self.pos = save
            return sdict
        self.pos += 6
        if self.data.startswith(b"\r\n", self.pos):
            self.pos += 2
        elif self.data.startswith(b"\n", self.pos) or self.data.startswith(b"\r", self.pos):
            self.pos += 1
        start = self.pos
        length = self.resolve(sdict.get("Length"))
        end = None
        if isinstance(length, int) and length >= 0 and start + length <= len(self.data):
            end = start + length
            probe = Lexer(self.data, end)
            probe.skip_ws()
            if not self.data.startswith(b"endstream", probe.pos):
                end = None  # declared length is wrong, rescan
        if end is None:
            marker = self.data.find(b"endstream", start)
            if marker == -1:
                raise PdfParseError("unterminated stream")
            end = marker
            while end > start and self.data[end - 1] in b"\r\n":
                end -= 1
        raw = self.data[start:end]
        tail = self.data.find(b"endstream", end)
        self.pos = len(self.data) if tail == -1 else tail + len(b"endstream")
        return Stream(sdict, raw)

    def parse_object(self):
        self.skip_ws()
        if self.pos >= len(self.data):
            raise PdfParseError("unexpected end of data")
        data = self.data
        c = data[self.pos]
        if c == 0x2F:  # '/'
            return self._parse_name()
        if c == 0x28:  # '('
            return self._parse_literal_string()
        if c == 0x3C:  # '<'
            if data.startswith(b"<<", self.pos):
                self.pos += 2
                d: dict = {}
                while True:
                    self.skip_ws()
                    if data.startswith(b">>", self.pos):
                        self.pos += 2
                        return self._maybe_stream(d)
                    if self.pos >= len(data):
                        raise PdfParseError("unterminated dictionary")
                    key = self.parse_object()
                    if not isinstance(key, Name):
                        raise PdfParseError(f"dictionary key is not a name: {key!r}")
                    d[str(key)] = self.parse_object()
            return self._parse_hex_string()
        if c == 0x5B:  # '['
            self.pos += 1
            arr = []
            while True:
                self.skip_ws()
                if data.startswith(b"]", self.pos):
                    self.pos += 1
                    return arr
                if self.pos >= len(data):
                    raise PdfParseError("unterminated array")
                arr.append(self.parse_object())
        if c in b"+-.0123456789":
            return self._parse_number_or_ref()
        m = KEYWORD_RE.match(data, self.pos)
        if m:
            word = m.group(0)
            if word == b"true":
                self.pos = m.end()
                return True
            if word == b"false":
                self.pos = m.end()
                return False
            if word == b"null":
                self.pos = m.end()
                return None
        raise PdfParseError(
            f"unparseable token at offset {self.pos}: {data[self.pos:self.pos + 12]!r}"
        )


class XrefEntry(NamedTuple):
    kind: int  # 0 free, 1 offset, 2 in object stream
    a: int  # offset, or container object number
    b: int  # generation, or index within the container


class Page:
    """One page with its inherited attributes resolved."""

    def __init__(self, doc: "PdfDocument", index: int, pdict: dict, inherited: dict) -> None:
        self.doc = doc
        self.index = index
        self.dict = pdict
        self._inherited = inherited

    def _attr(self, key: str):
        if key in self.dict:
            return self.doc.resolve(self.dict[key])
        return self._inherited.get(key)

    @property
    def media_box(self) -> tuple[float, float, float, float]:
        box = self._attr("MediaBox")
        if not isinstance(box, list) or len(box) != 4:
            return (0.0, 0.0, 612.0, 792.0)
        vals = [float(self.doc.resolve(v)) for v in box]
        x0, x1 = sorted((vals[0], vals[2]))
        y0, y1 = sorted((vals[1], vals[3]))
        return (x0, y0, x1, y1)

    @property
    def resources(self) -> dict:
        res = self._attr("Resources")
        return res if isinstance(res, dict) else {}

    def content_bytes(self) -> bytes:
        contents = self.doc.resolve(self.dict.get("Contents"))
        if contents is None:
            return b""
        if isinstance(contents, Stream):
            return contents.data(self.doc)
        if isinstance(contents, list):
            parts = []
            for item in contents:
                s = self.doc.resolve(item)
                if isinstance(s, Stream):
                    parts.append(s.data(self.doc))
            return b"\n".join(parts)
        return b""


class PdfDocument:
    """A parsed PDF: cross-reference map, object cache, page list."""

    def __init__(self, data: bytes) -> None:
        head = data.find(b"%PDF-", 0, 1024)
        if head == -1:
            raise PdfParseError("no PDF header")
        if head:
            data = data[head:]
        self.data = data
        self.xref: dict[int, XrefEntry] = {}
        self.trailer: dict = {}
        self._cache: dict[int, object] = {}
        self._loading: set[int] = set()
        try:
            self._load_xref_chain()
        except PdfParseError:
            self._rebuild_xref()
        if not self.trailer or "Root" not in self.trailer:
            self._rebuild_xref()
        if "Encrypt" in self.trailer:
            raise PdfParseError("encrypted document")
        self.pages: list[Page] = list(self._walk_pages())

    # ------------------------------------------------------------- xref

    def _load_xref_chain(self) -> None:
        tail = self.data[-2048:]
        marker = tail.rfind(b"startxref")
        if marker == -1:
            raise PdfParseError("no startxref")
        lex = Lexer(self.data, len(self.data) - len(tail) + marker + len(b"startxref"))
        offset = lex.parse_object()
        if not isinstance(offset, int):
            raise PdfParseError("bad startxref offset")
        seen: set[int] = set()
        queue: list[int] = [offset]
        while queue:
            off = queue.pop(0)
            if off in seen or not 0 <= off < len(self.data):
                continue
            seen.add(off)
            trailer = self._load_xref_section(off)
            if not self.trailer:
                self.trailer = trailer
            for key in ("XRefStm", "Prev"):
                nxt = trailer.get(key)
                if isinstance(nxt, int):
                    # XRefStm entries outrank the table in hybrid files,
                    # so they load before the chain continues.
                    if key == "XRefStm":
                        queue.insert(0, nxt)
                    else:
                        queue.append(nxt)

    def _load_xref_section(self, offset: int) -> dict:
        lex = Lexer(self.data, offset, resolve=self.resolve)
        lex.skip_ws()
        if self.data.startswith(b"xref", lex.pos):
            lex.pos += 4
            return self._load_xref_table(lex)
        m = OBJ_HEADER_RE.match(self.data, lex.pos)
        if not m:
            raise PdfParseError(f"no xref section at offset {offset}")
        lex.pos = m.end()
        obj = lex.parse_object()
        if not isinstance(obj, Stream):
            raise PdfParseError(f"object at {offset} is not an xref stream")
        return self._load_xref_stream(obj)

    def _load_xref_table(self, lex: Lexer) -> dict:
        while True:
            lex.skip_ws()
            if self.data.startswith(b"trailer", lex.pos):
                lex.pos += len(b"trailer")
                trailer = lex.parse_object()
                if not isinstance(trailer, dict):
                    raise PdfParseError("trailer is not a dictionary")
                return trailer
            start = lex.parse_object()
            count = lex.parse_object()
            if not isinstance(start, int) or not isinstance(count, int):
                raise PdfParseError("bad xref subsection header")
            lex.skip_ws()
            for i in range(count):
                row = self.data[lex.pos : lex.pos + 20]
                m = re.match(rb"(\d{10})\s+(\d{5})\s+([nf])", row)
                if not m:
                    raise PdfParseError(f"bad xref row at offset {lex.pos}")
                num = start + i
                if num not in self.xref:
                    if m.group(3) == b"n":
                        self.xref[num] = XrefEntry(1, int(m.group(1)), int(m.group(2)))
                    else:
                        self.xref[num] = XrefEntry(0, 0, 0)
                lex.pos += m.end()
                while lex.pos < len(self.data) and self.data[lex.pos] in b"\r\n ":
                    lex.pos += 1

    def _load_xref_stream(self, stream: Stream) -> dict:
        d = stream.dict
        widths = [int(self.resolve(w)) for w in self.resolve(d.get("W", []))]
        if len(widths) != 3:
            raise PdfParseError("xref stream without a 3-field W array")
        size = int(self.resolve(d.get("Size", 0)))
        index = self.resolve(d.get("Index")) or [0, size]
        index = [int(self.resolve(v)) for v in index]
        payload = stream.data(self)
        row_len = sum(widths)
        pos = 0

        def field(width: int) -> int:
            nonlocal pos
            if width == 0:
                return 0
            val = int.from_bytes(payload[pos : pos + width], "big")
            pos += width
            return val

        for start, count in zip(index[0::2], index[1::2]):
            for i in range(count):
                if pos + row_len > len(payload):
                    break
                kind = field(widths[0]) if widths[0] else 1
                a = field(widths[1])
                b = field(widths[2])
                num = start + i
                if num not in self.xref:
                    self.xref[num] = XrefEntry(kind, a, b)
        return dict(d)

    def _rebuild_xref(self) -> None:
        """Last-chance recovery: scan for object headers directly."""
        self.xref.clear()
        self._cache.clear()
        for m in OBJ_HEADER_RE.finditer(self.data):
            # Later bodies win, matching incremental-update semantics.
            self.xref[int(m.group(1))] = XrefEntry(1, m.start(), int(m.group(2)))
        if not self.xref:
            raise PdfParseError("no objects found while rebuilding xref")
        trailer: dict = {}
        marker = self.data.rfind(b"trailer")
        while marker != -1 and not trailer:
            try:
                lex = Lexer(self.data, marker + len(b"trailer"), resolve=self.resolve)
                candidate = lex.parse_object()
                if isinstance(candidate, dict) and "Root" in candidate:
                    trailer = candidate
            except PdfParseError:
                pass
            marker = self.data.rfind(b"trailer", 0, marker)
        if not trailer:
            for num in sorted(self.xref):
                try:
                    obj = self.get_object(num)
                except PdfParseError:
                    continue
                inner = obj.dict if isinstance(obj, Stream) else obj
                if isinstance(inner, dict) and inner.get("Type") == "Catalog":
                    trailer = {"Root": Ref(num, 0)}
                    break
        if not trailer:
            raise PdfParseError("no document catalog found")
        self.trailer = trailer

    # ---------------------------------------------------------- objects

    def resolve(self, obj):
        seen = 0
        while isinstance(obj, Ref):
            obj = self.get_object(obj.num)
            seen += 1
            if seen > 64:
                raise PdfParseError("reference chain too deep")
        return obj

    def get_object(self, num: int):
        if num in self._cache:
            return self._cache[num]
        entry = self.xref.get(num)
        if entry is None or entry.kind == 0:
            return None
        if num in self._loading:
            raise PdfParseError(f"object {num} is self-referential")
        self._loading.add(num)
        try:
            if entry.kind == 1:
                obj = self._parse_at_offset(num, entry.a)
            else:
                obj = self._load_from_objstm(num, entry.a)
        finally:
            self._loading.discard(num)
        self._cache[num] = obj
        return obj

    def _parse_at_offset(self, num: int, offset: int):
        if not 0 <= offset < len(self.data):
            raise PdfParseError(f"offset of object {num} is out of range")
        m = OBJ_HEADER_RE.match(self.data, offset)
        if not m:
            lex = Lexer(self.data, offset)
            lex.skip_ws()
            m = OBJ_HEADER_RE.match(self.data, lex.pos)
        if not m or int(m.group(1)) != num:
            # Stale offset; fall back to searching for the object header.
            pattern = re.compile(rb"(?<![0-9])" + str(num).encode() + rb"\s+\d+\s+obj\b")
            found = None
            for cand in pattern.finditer(self.data):
                found = cand
            if found is None:
                raise PdfParseError(f"object {num} not found")
            m = found
        lex = Lexer(self.data, m.end(), resolve=self.resolve)
        return lex.parse_object()

    def _load_from_objstm(self, num: int, container: int):
        stream = self.get_object(container)
        if not isinstance(stream, Stream):
            raise PdfParseError(f"object stream {container} is missing")
        n = int(self.resolve(stream.dict.get("N", 0)))
        first = int(self.resolve(stream.dict.get("First", 0)))
        payload = stream.data(self)
        header = Lexer(payload, 0)
        table: list[tuple[int, int]] = []
        for _ in range(n):
            onum = header.parse_object()
            ooff = header.parse_object()
            if not isinstance(onum, int) or not isinstance(ooff, int):
                raise PdfParseError(f"bad object stream header in {container}")
            table.append((onum, ooff))
        found = None
        for onum, ooff in table:
            if onum in self._cache:
                continue
            try:
                obj = Lexer(payload, first + ooff, resolve=self.resolve).parse_object()
            except PdfParseError:
                obj = None
            self._cache[onum] = obj
            if onum == num:
                found = obj
        if num in self._cache:
            return self._cache[num]
        if found is None:
            raise PdfParseError(f"object {num} not present in object stream {container}")
        return found

    # ------------------------------------------------------------ pages

    def _walk_pages(self) -> Iterator[Page]:
        root = self.resolve(self.trailer.get("Root"))
        if not isinstance(root, dict):
            raise PdfParseError("document catalog is unusable")
        top = self.resolve(root.get("Pages"))
        if not isinstance(top, dict):
            raise PdfParseError("page tree root is unusable")
        counter = 0
        seen: set[int] = set()
        inheritable = ("Resources", "MediaBox", "CropBox", "Rotate")

        def walk(node: dict, inherited: dict) -> Iterator[Page]:
            nonlocal counter
            node_id = id(node)
            if node_id in seen:
                return
            seen.add(node_id)
            merged = dict(inherited)
            for key in inheritable:
                if key in node:
                    merged[key] = self.resolve(node[key])
            ntype = node.get("Type")
            kids = self.resolve(node.get("Kids"))
            if ntype == "Page" or (kids is None and "Contents" in node):
                page = Page(self, counter, node, merged)
                counter += 1
                yield page
                return
            if isinstance(kids, list):
                for kid in kids:
                    child = self.resolve(kid)
                    if isinstance(child, dict):
                        yield from walk(child, merged)

        yield from walk(top, {})

    @property
    def page_count(self) -> int:
        return len(self.pages)

    def page(self, index: int) -> Page:
        if not 0 <= index < len(self.pages):
            raise PageOutOfRange(
                f"page {index} out of range, document has {len(self.pages)}"
            )
        return self.pages[index]
