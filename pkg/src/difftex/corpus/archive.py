"""Unpacking of downloaded source blobs.

arXiv serves source as gzipped tar, gzipped single files, bare tar,
occasionally a bare .tex file, and sometimes a PDF when no source was
deposited.  The format is sniffed from magic bytes, never from the
file name.
"""

from __future__ import annotations

import gzip
import io
import os
import tarfile
import zlib
from pathlib import Path

from ..errors import CorruptArchive, UnsafePath
from .model import SourceBundle

GZIP_MAGIC = b"\x1f\x8b"
PDF_MAGIC = b"%PDF-"
TAR_MAGIC_OFFSET = 257
TAR_MAGIC = b"ustar"


def _member_is_safe(name: str) -> bool:
    if name.startswith("/") or name.startswith("\\"):
        return False
    norm = os.path.normpath(name)
    return not (norm == ".." or norm.startswith("../") or os.path.isabs(norm))


def _extract_tar(tf: tarfile.TarFile, dest: Path) -> int:
    count = 0
    for member in tf:
        if not _member_is_safe(member.name):
            raise UnsafePath(f"archive member escapes the tree: {member.name!r}")
        if member.isdir():
            (dest / member.name).mkdir(parents=True, exist_ok=True)
            continue
        if not member.isfile():
            # Links and device nodes have no business in a TeX source tree.
            continue
        target = dest / member.name
        target.parent.mkdir(parents=True, exist_ok=True)
        src = tf.extractfile(member)
        if src is None:
            continue
        with src:
            target.write_bytes(src.read())
        count += 1
    return count


def extract_archive(
    blob: Path, dest: Path, bundle_id: str = "", taxonomy: str = ""
) -> SourceBundle:
    """Unpack ``blob`` under ``dest`` and return the resulting bundle.

    The entry point is left unset; identification is a separate step.
    Raises CorruptArchive for undecodable blobs and for PDF-only
    deposits, UnsafePath when a member would escape ``dest``.
    """
    data = blob.read_bytes()
    if not data:
        raise CorruptArchive(f"empty blob: {blob}")
    dest.mkdir(parents=True, exist_ok=True)

    if data.startswith(PDF_MAGIC):
        raise CorruptArchive(f"blob is a PDF, not TeX source: {blob}")

    if data.startswith(GZIP_MAGIC):
        try:
            with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tf:
                _extract_tar(tf, dest)
        except tarfile.ReadError:
            # Gzip around a single file rather than a tar.
            try:
                payload = gzip.decompress(data)
            except (OSError, EOFError, zlib.error) as exc:
                raise CorruptArchive(f"undecodable gzip blob: {blob}") from exc
            (dest / "main.tex").write_bytes(payload)
        except (OSError, EOFError, zlib.error) as exc:
            raise CorruptArchive(f"corrupt archive: {blob}") from exc
        return SourceBundle(bundle_id=bundle_id, root_dir=dest, taxonomy=taxonomy)

    if len(data) > TAR_MAGIC_OFFSET + len(TAR_MAGIC) and data[
        TAR_MAGIC_OFFSET : TAR_MAGIC_OFFSET + len(TAR_MAGIC)
    ].startswith(TAR_MAGIC):
        try:
            with tarfile.open(fileobj=io.BytesIO(data), mode="r:") as tf:
                _extract_tar(tf, dest)
        except tarfile.ReadError as exc:
            raise CorruptArchive(f"corrupt tar blob: {blob}") from exc
        return SourceBundle(bundle_id=bundle_id, root_dir=dest, taxonomy=taxonomy)

    # Last resort: treat the blob as a bare TeX file.
    if b"\x00" in data[:4096]:
        raise CorruptArchive(f"unrecognised binary blob: {blob}")
    (dest / "main.tex").write_bytes(data)
    return SourceBundle(bundle_id=bundle_id, root_dir=dest, taxonomy=taxonomy)
