"""Stream filter decoding: Flate with predictors, ASCII codecs, RunLength.

DCTDecode is passed through untouched; image decoding hands JPEG bytes
to Pillow.  Filters outside this set raise PdfParseError.
"""

from __future__ import annotations

import base64
import binascii
import zlib

from ..errors import PdfParseError

PASSTHROUGH = {"DCTDecode", "DCT", "JPXDecode"}


def _tiff_predictor(data: bytes, colors: int, bpc: int, columns: int) -> bytes:
    if bpc != 8:
        raise PdfParseError(f"TIFF predictor with {bpc} bits per component")
    row_len = colors * columns
    out = bytearray(data)
    for row_start in range(0, len(out) - row_len + 1, row_len):
        for i in range(row_start + colors, row_start + row_len):
            out[i] = (out[i] + out[i - colors]) & 0xFF
    return bytes(out)


def _png_predictor(data: bytes, colors: int, bpc: int, columns: int) -> bytes:
    bpp = max(1, (colors * bpc + 7) // 8)
    row_len = (colors * bpc * columns + 7) // 8
    stride = row_len + 1
    out = bytearray()
    prev = bytearray(row_len)
    for row_start in range(0, len(data) - stride + 1, stride):
        ftype = data[row_start]
        row = bytearray(data[row_start + 1 : row_start + 1 + row_len])
        if ftype == 1:  # Sub
            for i in range(bpp, row_len):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(row_len):
                row[i] = (row[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(row_len):
                left = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + (left + prev[i]) // 2) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(row_len):
                a = row[i - bpp] if i >= bpp else 0
                b = prev[i]
                c = prev[i - bpp] if i >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                row[i] = (row[i] + pred) & 0xFF
        elif ftype != 0:
            raise PdfParseError(f"unknown PNG row filter {ftype}")
        out.extend(row)
        prev = row
    return bytes(out)


def apply_predictor(data: bytes, parms: dict) -> bytes:
    predictor = int(parms.get("Predictor", 1))
    if predictor <= 1:
        return data
    colors = int(parms.get("Colors", 1))
    bpc = int(parms.get("BitsPerComponent", 8))
    columns = int(parms.get("Columns", 1))
    if predictor == 2:
        return _tiff_predictor(data, colors, bpc, columns)
    if 10 <= predictor <= 15:
        return _png_predictor(data, colors, bpc, columns)
    raise PdfParseError(f"unknown predictor {predictor}")


def flate_decode(data: bytes, parms: dict) -> bytes:
    try:
        raw = zlib.decompress(data)
    except zlib.error:
        # Salvage what a truncated stream still holds.
        try:
            raw = zlib.decompressobj().decompress(data)
        except zlib.error as exc:
            raise PdfParseError("undecodable Flate stream") from exc
    return apply_predictor(raw, parms)


def ascii_hex_decode(data: bytes, parms: dict) -> bytes:
    end = data.find(b">")
    if end >= 0:
        data = data[:end]
    compact = bytes(c for c in data if not chr(c).isspace())
    if len(compact) % 2:
        compact += b"0"
    try:
        return binascii.unhexlify(compact)
    except binascii.Error as exc:
        raise PdfParseError("bad ASCIIHex stream") from exc


def ascii85_decode(data: bytes, parms: dict) -> bytes:
    data = data.strip()
    if data.startswith(b"<~"):
        data = data[2:]
    if data.endswith(b"~>"):
        data = data[:-2]
    try:
        return base64.a85decode(data, ignorechars=b" \t\n\r\x0c")
    except ValueError as exc:
        raise PdfParseError("bad ASCII85 stream") from exc


def run_length_decode(data: bytes, parms: dict) -> bytes:
    out = bytearray()
    i = 0
    while i < len(data):
        n = data[i]
        if n == 128:
            break
        if n < 128:
            out += data[i + 1 : i + 2 + n]
            i += 2 + n
        else:
            out += data[i + 1 : i + 2] * (257 - n)
            i += 2
    return bytes(out)


DECODERS = {
    "FlateDecode": flate_decode,
    "Fl": flate_decode,
    "ASCIIHexDecode": ascii_hex_decode,
    "AHx": ascii_hex_decode,
    "ASCII85Decode": ascii85_decode,
    "A85": ascii85_decode,
    "RunLengthDecode": run_length_decode,
    "RL": run_length_decode,
}


def decode_stream(data: bytes, filters: list[str], parms: list[dict]) -> tuple[bytes, str | None]:
    """Run the filter chain.  Returns (data, undecoded_terminal_filter).

    A terminal DCT/JPX filter is reported instead of applied so image
    handling can feed the compressed bytes to Pillow.
    """
    for i, name in enumerate(filters):
        if name in PASSTHROUGH:
            if i != len(filters) - 1:
                raise PdfParseError(f"{name} is not the terminal filter")
            return data, name
        decoder = DECODERS.get(name)
        if decoder is None:
            raise PdfParseError(f"unsupported stream filter {name}")
        data = decoder(data, parms[i] if i < len(parms) else {})
    return data, None
