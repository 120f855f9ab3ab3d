"""Value types for the corpus layer."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

ARXIV_ID_RE = re.compile(r"^(\d{2})(\d{2})\.(\d{4,5})$")

# Months in an identifier prefix run 01..12; the two-digit year counts
# from 2000 (the 4+ digit dotted scheme only exists from 2007 on).


@dataclass(frozen=True, order=True)
class ArxivId:
    """A new-scheme arXiv identifier such as 2306.01691."""

    value: str

    def __post_init__(self) -> None:
        m = ARXIV_ID_RE.match(self.value)
        if not m:
            raise ValueError(f"not a recognised arXiv identifier: {self.value!r}")
        month = int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"impossible month in identifier: {self.value!r}")

    @property
    def year(self) -> int:
        return 2000 + int(self.value[:2])

    @property
    def month(self) -> int:
        return int(self.value[2:4])

    @property
    def year_month(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def __str__(self) -> str:
        return self.value


YEAR_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True)
class TaxonomyQuery:
    """One category listing request: taxonomy, submission month, size cap."""

    taxonomy: str
    year_month: str
    limit: int = 100

    def __post_init__(self) -> None:
        if not self.taxonomy or any(c.isspace() for c in self.taxonomy):
            raise ValueError(f"bad taxonomy: {self.taxonomy!r}")
        m = YEAR_MONTH_RE.match(self.year_month)
        if not m or not 1 <= int(m.group(2)) <= 12:
            raise ValueError(f"bad year-month: {self.year_month!r}")
        if self.limit < 1:
            raise ValueError("limit must be at least 1")

    @property
    def date_range(self) -> tuple[str, str]:
        """Inclusive [start, end] timestamps for the API's submittedDate."""
        year, month = YEAR_MONTH_RE.match(self.year_month).groups()
        y, mo = int(year), int(month)
        if mo == 2:
            last = 29 if (y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)) else 28
        elif mo in (4, 6, 9, 11):
            last = 30
        else:
            last = 31
        return f"{y:04d}{mo:02d}010000", f"{y:04d}{mo:02d}{last:02d}2359"


@dataclass
class SourceBundle:
    """An unpacked source tree plus what we know about it.

    ``bundle_id`` is the arXiv identifier for fetched papers, or any
    caller-chosen name for local corpora.  ``entrypoint`` is relative to
    ``root_dir``.
    """

    bundle_id: str
    root_dir: Path
    taxonomy: str = ""
    entrypoint: Path | None = None
    document_class: str | None = None
    reconditioned: bool = False

    def with_entrypoint(self, entrypoint: Path) -> "SourceBundle":
        return replace(self, entrypoint=entrypoint)


DEFAULT_BANNED = (
    "pdffilesize",
    "pdfmdfivesum",
    "pdffiledump",
    "pdfstrcmp",
)

POLICIES = ("delete-line", "comment-out", "substitute-empty")


@dataclass(frozen=True)
class ReconditionProfile:
    """What to remove from sources before cross-engine compilation, and how.

    ``banned_primitives`` are control-word names without the backslash.
    The default list holds pdfTeX-only primitives that make other engines
    halt; ``pdfsavepos`` stays off it because packages shim it widely.
    """

    banned_primitives: tuple[str, ...] = DEFAULT_BANNED
    replacement_policy: str = "substitute-empty"
    scan_extensions: tuple[str, ...] = (".tex", ".sty", ".cls")

    def __post_init__(self) -> None:
        for name in self.banned_primitives:
            if not name or not re.fullmatch(r"[A-Za-z@]+", name):
                raise ValueError(f"bad primitive name: {name!r}")
        if self.replacement_policy not in POLICIES:
            raise ValueError(f"unknown policy: {self.replacement_policy!r}")
        for ext in self.scan_extensions:
            if not ext.startswith("."):
                raise ValueError(f"extension must start with a dot: {ext!r}")


def write_manifest(bundles: list[SourceBundle], path: Path) -> None:
    """Persist a corpus manifest as JSON, one entry per bundle."""
    entries = []
    for b in bundles:
        entries.append(
            {
                "id": b.bundle_id,
                "taxonomy": b.taxonomy,
                "root_dir": str(b.root_dir),
                "entrypoint": str(b.entrypoint) if b.entrypoint else None,
                "document_class": b.document_class,
                "reconditioned": b.reconditioned,
            }
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"bundles": entries}, indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_manifest(path: Path) -> list[SourceBundle]:
    data = json.loads(path.read_text(encoding="utf-8"))
    out = []
    for e in data["bundles"]:
        out.append(
            SourceBundle(
                bundle_id=e["id"],
                root_dir=Path(e["root_dir"]),
                taxonomy=e.get("taxonomy", ""),
                entrypoint=Path(e["entrypoint"]) if e.get("entrypoint") else None,
                document_class=e.get("document_class"),
                reconditioned=bool(e.get("reconditioned", False)),
            )
        )
    return out
