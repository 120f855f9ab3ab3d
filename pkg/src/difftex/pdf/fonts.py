"""Font handling: decode show-operator strings into characters and
advances.

Simple fonts use the /Widths array plus their encoding (base encoding,
/Differences, ToUnicode); fonts without /Widths fall back to the
standard-14 metric tables that reportlab ships.  Composite fonts are
supported for the Identity CMaps that TeX engines emit, with ToUnicode
supplying the character mapping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from reportlab.pdfbase import _fontdata

from .cos import Name, Ref, Stream

STD14_ALIASES = {
    "Arial": "Helvetica",
    "Arial-Bold": "Helvetica-Bold",
    "Arial-Italic": "Helvetica-Oblique",
    "Arial-BoldItalic": "Helvetica-BoldOblique",
    "CourierNew": "Courier",
    "TimesNewRoman": "Times-Roman",
    "Times": "Times-Roman",
    "Times-Regular": "Times-Roman",
}

SUBSET_PREFIX_RE = re.compile(r"^[A-Z]{6}\+")

# Glyph names that decode to something other than themselves.  Letters
# and digits-as-words cover the standard encodings; the rest covers the
# punctuation, ligature, and accent names TeX fonts lean on.
GLYPH_TO_UNICODE = {
    "space": " ", "exclam": "!", "quotedbl": '"', "numbersign": "#",
    "dollar": "$", "percent": "%", "ampersand": "&", "quotesingle": "'",
    "parenleft": "(", "parenright": ")", "asterisk": "*", "plus": "+",
    "comma": ",", "hyphen": "-", "period": ".", "slash": "/",
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "colon": ":", "semicolon": ";", "less": "<", "equal": "=",
    "greater": ">", "question": "?", "at": "@", "bracketleft": "[",
    "backslash": "\\", "bracketright": "]", "asciicircum": "^",
    "underscore": "_", "grave": "`", "braceleft": "{", "bar": "|",
    "braceright": "}", "asciitilde": "~",
    "quoteleft": "‘", "quoteright": "’",
    "quotedblleft": "“", "quotedblright": "”",
    "quotesinglbase": "‚", "quotedblbase": "„",
    "guillemotleft": "«", "guillemotright": "»",
    "guilsinglleft": "‹", "guilsinglright": "›",
    "endash": "–", "emdash": "—", "bullet": "•",
    "dagger": "†", "daggerdbl": "‡", "periodcentered": "·",
    "ellipsis": "…", "perthousand": "‰", "minus": "−",
    "fraction": "⁄", "florin": "ƒ",
    "cent": "¢", "sterling": "£", "currency": "¤",
    "yen": "¥", "Euro": "€", "euro": "€",
    "section": "§", "paragraph": "¶", "copyright": "©",
    "registered": "®", "trademark": "™", "degree": "°",
    "plusminus": "±", "multiply": "×", "divide": "÷",
    "logicalnot": "¬", "mu": "µ", "micro": "µ",
    "onequarter": "¼", "onehalf": "½", "threequarters": "¾",
    "onesuperior": "¹", "twosuperior": "²",
    "threesuperior": "³", "ordfeminine": "ª",
    "ordmasculine": "º", "exclamdown": "¡",
    "questiondown": "¿", "brokenbar": "¦",
    "fi": "ﬁ", "fl": "ﬂ", "ff": "ﬀ",
    "ffi": "ﬃ", "ffl": "ﬄ",
    "germandbls": "ß", "ae": "æ", "AE": "Æ",
    "oe": "œ", "OE": "Œ", "oslash": "ø", "Oslash": "Ø",
    "aring": "å", "Aring": "Å", "eth": "ð", "Eth": "Ð",
    "thorn": "þ", "Thorn": "Þ", "lslash": "ł",
    "Lslash": "Ł", "dotlessi": "ı", "dotlessj": "ȷ",
    "agrave": "à", "aacute": "á", "acircumflex": "â",
    "atilde": "ã", "adieresis": "ä",
    "egrave": "è", "eacute": "é", "ecircumflex": "ê",
    "edieresis": "ë", "igrave": "ì", "iacute": "í",
    "icircumflex": "î", "idieresis": "ï",
    "ograve": "ò", "oacute": "ó", "ocircumflex": "ô",
    "otilde": "õ", "odieresis": "ö",
    "ugrave": "ù", "uacute": "ú", "ucircumflex": "û",
    "udieresis": "ü", "yacute": "ý", "ydieresis": "ÿ",
    "ntilde": "ñ", "ccedilla": "ç",
    "Agrave": "À", "Aacute": "Á", "Acircumflex": "Â",
    "Atilde": "Ã", "Adieresis": "Ä",
    "Egrave": "È", "Eacute": "É", "Ecircumflex": "Ê",
    "Edieresis": "Ë", "Igrave": "Ì", "Iacute": "Í",
    "Icircumflex": "Î", "Idieresis": "Ï",
    "Ograve": "Ò", "Oacute": "Ó", "Ocircumflex": "Ô",
    "Otilde": "Õ", "Odieresis": "Ö",
    "Ugrave": "Ù", "Uacute": "Ú", "Ucircumflex": "Û",
    "Udieresis": "Ü", "Yacute": "Ý", "Ntilde": "Ñ",
    "Ccedilla": "Ç", "Scaron": "Š", "scaron": "š",
    "Zcaron": "Ž", "zcaron": "ž", "Ydieresis": "Ÿ",
    # Spacing accents map to combining marks so that accent+base pairs
    # can be composed during text normalisation.
    "acute": "́", "dieresis": "̈", "macron": "̄",
    "circumflex": "̂", "tilde": "̃", "breve": "̆",
    "dotaccent": "̇", "ring": "̊", "cedilla": "̧",
    "hungarumlaut": "̋", "ogonek": "̨", "caron": "̌",
}

UNI_NAME_RE = re.compile(r"^uni([0-9A-Fa-f]{4})$")
U_NAME_RE = re.compile(r"^u([0-9A-Fa-f]{4,6})$")


def glyph_name_to_unicode(name: str) -> str:
    if len(name) == 1:
        return name
    hit = GLYPH_TO_UNICODE.get(name)
    if hit is not None:
        return hit
    m = UNI_NAME_RE.match(name)
    if m:
        return chr(int(m.group(1), 16))
    m = U_NAME_RE.match(name)
    if m:
        cp = int(m.group(1), 16)
        if cp <= 0x10FFFF:
            return chr(cp)
    return ""


def std14_name(base_font: str) -> str | None:
    """Map a /BaseFont value onto a standard-14 metrics table name."""
    name = SUBSET_PREFIX_RE.sub("", base_font or "")
    if name in _fontdata.widthsByFontGlyph:
        return name
    return STD14_ALIASES.get(name)


HEX_RE = re.compile(rb"<([0-9A-Fa-f]*)>")
BFCHAR_RE = re.compile(rb"beginbfchar(.*?)endbfchar", re.S)
BFRANGE_RE = re.compile(rb"beginbfrange(.*?)endbfrange", re.S)
TOKEN_RE = re.compile(rb"<([0-9A-Fa-f]*)>|\[|\]")


def _utf16(hexdigits: bytes) -> str:
    if not hexdigits:
        return ""
    raw = bytes.fromhex(hexdigits.decode("ascii"))
    if len(raw) % 2:
        raw += b"\x00"
    try:
        return raw.decode("utf-16-be")
    except UnicodeDecodeError:
        return ""


def parse_tounicode(data: bytes) -> dict[int, str]:
    """Extract the code-to-text mapping from a ToUnicode CMap."""
    mapping: dict[int, str] = {}
    for block in BFCHAR_RE.findall(data):
        hexes = HEX_RE.findall(block)
        for src, dst in zip(hexes[0::2], hexes[1::2]):
            if src:
                mapping[int(src, 16)] = _utf16(dst)
    for block in BFRANGE_RE.findall(data):
        tokens = list(TOKEN_RE.finditer(block))
        pos = 0
        while pos + 2 < len(tokens):
            lo_m, hi_m, third = tokens[pos], tokens[pos + 1], tokens[pos + 2]
            if lo_m.group(1) is None or hi_m.group(1) is None:
                pos += 1
                continue
            lo, hi = int(lo_m.group(1), 16), int(hi_m.group(1), 16)
            if third.group(0) == b"[":
                # <lo> <hi> [<d0> <d1> ...]
                pos += 3
                code = lo
                while pos < len(tokens) and tokens[pos].group(0) != b"]":
                    if tokens[pos].group(1) is not None and code <= hi:
                        mapping[code] = _utf16(tokens[pos].group(1))
                        code += 1
                    pos += 1
                pos += 1  # ']'
            else:
                # <lo> <hi> <dstStart>: the final code unit increments.
                dst = third.group(1) or b""
                if dst and hi >= lo and hi - lo < 65536:
                    if len(dst) <= 4:
                        start = int(dst, 16)
                        for i in range(hi - lo + 1):
                            mapping[lo + i] = chr((start + i) & 0x10FFFF)
                    else:
                        base = _utf16(dst)
                        if base:
                            head, last = base[:-1], ord(base[-1])
                            for i in range(hi - lo + 1):
                                mapping[lo + i] = head + chr((last + i) & 0x10FFFF)
                pos += 3
    return mapping


@dataclass
class DecodedGlyph:
    code: int
    char: str
    width: float  # advance in em units (text space, font size 1)
    is_space: bool
    is_word_boundary_code: bool  # single-byte code 32, for Tw


class LoadedFont:
    """A font dictionary made usable for decoding and metrics."""

    def __init__(self, doc, font_dict: dict, identity: tuple) -> None:
        self.doc = doc
        self.identity = identity
        resolve = doc.resolve
        self.subtype = str(resolve(font_dict.get("Subtype", "")) or "")
        self.base_font = str(resolve(font_dict.get("BaseFont", "")) or "")
        self.is_cid = self.subtype == "Type0"
        self._to_unicode: dict[int, str] = {}
        tu = resolve(font_dict.get("ToUnicode"))
        if isinstance(tu, Stream):
            self._to_unicode = parse_tounicode(tu.data(doc))

        if self.is_cid:
            self._init_cid(font_dict)
        else:
            self._init_simple(font_dict)

    # -------------------------------------------------------- simple

    def _init_simple(self, font_dict: dict) -> None:
        resolve = self.doc.resolve
        std = std14_name(self.base_font)
        stripped = SUBSET_PREFIX_RE.sub("", self.base_font)
        if stripped == "Symbol":
            default_enc = "SymbolEncoding"
        elif stripped == "ZapfDingbats":
            default_enc = "ZapfDingbatsEncoding"
        else:
            default_enc = "StandardEncoding"
        enc_obj = resolve(font_dict.get("Encoding"))
        differences: list = []
        if isinstance(enc_obj, (Name, str)) and str(enc_obj) in _fontdata.encodings:
            base_enc = str(enc_obj)
        elif isinstance(enc_obj, dict):
            base = resolve(enc_obj.get("BaseEncoding"))
            base_enc = (
                str(base) if base and str(base) in _fontdata.encodings else default_enc
            )
            differences = resolve(enc_obj.get("Differences")) or []
        else:
            base_enc = default_enc
        names = list(_fontdata.encodings[base_enc])
        code = 0
        for item in differences:
            item = resolve(item)
            if isinstance(item, (int, float)):
                code = int(item)
            elif isinstance(item, (Name, str)) and 0 <= code <= 255:
                names[code] = str(item)
                code += 1
        self._glyph_names = names
        self._enc_unicode = {
            c: glyph_name_to_unicode(n) for c, n in enumerate(names) if n
        }

        # Type3 widths live in glyph space scaled by the FontMatrix;
        # everything else uses the usual 1/1000 text space scale.
        self._wscale = 0.001
        if self.subtype == "Type3":
            fm = resolve(font_dict.get("FontMatrix"))
            if isinstance(fm, list) and len(fm) == 6:
                try:
                    self._wscale = float(resolve(fm[0]))
                except (TypeError, ValueError):
                    pass
        widths = resolve(font_dict.get("Widths"))
        first = int(resolve(font_dict.get("FirstChar", 0)) or 0)
        descriptor = resolve(font_dict.get("FontDescriptor")) or {}
        missing = float(resolve(descriptor.get("MissingWidth", 0)) or 0)
        self._widths: dict[int, float] = {}
        if isinstance(widths, list) and widths:
            for i, w in enumerate(widths):
                w = resolve(w)
                if isinstance(w, (int, float)):
                    self._widths[first + i] = float(w)
            self._default_width = missing
        elif std:
            table = _fontdata.widthsByFontGlyph[std]
            for c, n in enumerate(names):
                if n and n in table:
                    self._widths[c] = float(table[n])
            self._default_width = missing
        else:
            self._default_width = missing or 500.0

        self.ascent, self.descent = self._vertical_metrics(descriptor, std)

    def _vertical_metrics(self, descriptor: dict, std: str | None) -> tuple[float, float]:
        resolve = self.doc.resolve
        asc = resolve(descriptor.get("Ascent"))
        desc = resolve(descriptor.get("Descent"))
        if isinstance(asc, (int, float)) and asc > 0:
            a = float(asc) / 1000.0
        elif std:
            a = _fontdata.ascent_descent.get(std, (718, -207))[0] / 1000.0
        else:
            a = 0.75
        if isinstance(desc, (int, float)) and desc < 0:
            d = float(desc) / 1000.0
        elif std:
            d = _fontdata.ascent_descent.get(std, (718, -207))[1] / 1000.0
        else:
            d = -0.25
        return a, d

    # ----------------------------------------------------------- cid

    def _init_cid(self, font_dict: dict) -> None:
        resolve = self.doc.resolve
        enc = resolve(font_dict.get("Encoding"))
        self._identity_cid = isinstance(enc, (Name, str)) and str(enc).startswith(
            "Identity"
        )
        descendants = resolve(font_dict.get("DescendantFonts")) or []
        descendant = resolve(descendants[0]) if descendants else {}
        if not isinstance(descendant, dict):
            descendant = {}
        self._default_width = float(resolve(descendant.get("DW", 1000)) or 1000)
        self._widths = {}
        w_array = resolve(descendant.get("W")) or []
        i = 0
        while i < len(w_array):
            first = resolve(w_array[i])
            if i + 1 >= len(w_array):
                break
            second = resolve(w_array[i + 1])
            if isinstance(second, list):
                for j, w in enumerate(second):
                    w = resolve(w)
                    if isinstance(w, (int, float)):
                        self._widths[int(first) + j] = float(w)
                i += 2
            else:
                third = resolve(w_array[i + 2]) if i + 2 < len(w_array) else 0
                for cid in range(int(first), int(second) + 1):
                    self._widths[cid] = float(third)
                i += 3
        descriptor = resolve(descendant.get("FontDescriptor")) or {}
        self.ascent, self.descent = self._vertical_metrics(descriptor, None)

    # -------------------------------------------------------- decode

    def decode(self, raw: bytes) -> list[DecodedGlyph]:
        out: list[DecodedGlyph] = []
        if self.is_cid:
            # Identity CMaps use two-byte codes; that is what TeX emits.
            for i in range(0, len(raw) - 1, 2):
                code = (raw[i] << 8) | raw[i + 1]
                char = self._to_unicode.get(code, "")
                width = self._widths.get(code, self._default_width) / 1000.0
                out.append(DecodedGlyph(code, char, width, char == " ", False))
            return out
        for code in raw:
            char = self._to_unicode.get(code)
            if char is None:
                char = self._enc_unicode.get(code, "")
            width = self._widths.get(code, self._default_width) * self._wscale
            out.append(DecodedGlyph(code, char, width, char == " ", code == 32))
        return out


def load_font(doc, font_obj, resource_name: str) -> LoadedFont:
    """Resolve a /Font resource entry into a LoadedFont.

    Identity is the indirect reference when there is one, so the same
    font object used on many pages counts once in summaries.
    """
    if isinstance(font_obj, Ref):
        identity: tuple = ("ref", font_obj.num, font_obj.gen)
        font_dict = doc.resolve(font_obj)
    else:
        font_dict = font_obj
        identity = ("inline", resource_name, str(font_dict.get("BaseFont", "")))
    if not isinstance(font_dict, dict):
        font_dict = {}
    return LoadedFont(doc, font_dict, identity)
