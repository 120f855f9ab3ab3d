"""Static scanning of TeX source trees.

Everything here is line-based text analysis, not TeX macro expansion:
a ``%`` not preceded by a backslash starts a comment, and import
statements are recognised syntactically.  That is deliberate; the goal
is picking an entry point and a document class for the overwhelmingly
common layouts, not simulating catcodes.
"""

from __future__ import annotations

import re
from pathlib import Path

from ..errors import ClassNotFound, NoEntrypoint
from .model import SourceBundle

COMMON_ENTRY_NAMES = ("main.tex", "manuscript.tex", "paper.tex", "ms.tex")

DOCUMENTCLASS_RE = re.compile(
    r"\\documentclass\s*(?:\[[^\]]*\])?\s*\{\s*([^}\s]+)\s*\}", re.DOTALL
)
IMPORT_RE = re.compile(r"\\(?:input|include)\s*\{\s*([^}]+?)\s*\}")
BEGIN_DOCUMENT_RE = re.compile(r"\\begin\s*\{\s*document\s*\}")
PLAIN_END_RE = re.compile(r"\\bye\b")


def strip_comment(line: str) -> str:
    """Drop the part of ``line`` from the first unescaped ``%`` on."""
    for i, c in enumerate(line):
        if c == "%" and (i == 0 or line[i - 1] != "\\"):
            return line[:i]
    return line


def stripped_source(path: Path) -> str:
    """File content with comments removed, decoded permissively.

    Latin-1 never fails and is byte-preserving, which is all the marker
    regexes need; arXiv sources mix UTF-8, Latin-1, and pure ASCII.
    """
    raw = path.read_bytes().decode("latin-1")
    return "\n".join(strip_comment(line) for line in raw.splitlines())


def _is_candidate(text: str) -> bool:
    return bool(DOCUMENTCLASS_RE.search(text) or PLAIN_END_RE.search(text))


def identify_entrypoints(bundle: SourceBundle) -> list[Path]:
    """Rank the compilable .tex files in a bundle, best candidate first.

    Candidates contain an uncommented ``\\documentclass`` (or a plain-TeX
    ``\\bye``).  Ranking prefers the common entry names, then files that
    reach ``\\begin{document}``, then shallower paths, then lexicographic
    order, so the result is stable for a given tree.
    """
    ranked: list[tuple[tuple, Path]] = []
    for path in sorted(bundle.root_dir.rglob("*.tex")):
        if not path.is_file():
            continue
        text = stripped_source(path)
        if not _is_candidate(text):
            continue
        rel = path.relative_to(bundle.root_dir)
        name = rel.name.lower()
        name_rank = (
            COMMON_ENTRY_NAMES.index(name)
            if name in COMMON_ENTRY_NAMES
            else len(COMMON_ENTRY_NAMES)
        )
        has_begin = 0 if BEGIN_DOCUMENT_RE.search(text) else 1
        depth = len(rel.parts) - 1
        ranked.append(((name_rank, has_begin, depth, str(rel)), rel))
    if not ranked:
        raise NoEntrypoint(f"no compilable .tex file under {bundle.root_dir}")
    ranked.sort(key=lambda item: item[0])
    return [rel for _, rel in ranked]


def _resolve_import(root: Path, current: Path, target: str) -> Path | None:
    """Find the file a ``\\input{target}`` refers to, if it exists."""
    target = target.strip()
    if not target:
        return None
    names = [target] if target.endswith(".tex") else [target, target + ".tex"]
    for name in names:
        for base in (current.parent, root):
            candidate = (base / name).resolve()
            try:
                candidate.relative_to(root.resolve())
            except ValueError:
                continue
            if candidate.is_file():
                return candidate
    return None


def detect_documentclass(bundle: SourceBundle) -> str:
    """Return the document class name used by the bundle's entry point.

    Follows ``\\input``/``\\include`` depth-first from the entry point
    until an uncommented ``\\documentclass`` shows up.  Cycle-safe.
    """
    if bundle.entrypoint is None:
        raise ClassNotFound(f"bundle {bundle.bundle_id} has no entry point set")
    root = bundle.root_dir
    start = root / bundle.entrypoint
    stack = [start]
    seen: set[Path] = set()
    while stack:
        path = stack.pop()
        key = path.resolve()
        if key in seen or not path.is_file():
            continue
        seen.add(key)
        text = stripped_source(path)
        m = DOCUMENTCLASS_RE.search(text)
        if m:
            return m.group(1)
        # Push imports in reverse so they are visited in source order.
        imports = [
            _resolve_import(root, path, t) for t in IMPORT_RE.findall(text)
        ]
        for child in reversed([p for p in imports if p is not None]):
            stack.append(child)
    raise ClassNotFound(
        f"no \\documentclass reachable from {bundle.entrypoint} in {bundle.bundle_id or root}"
    )
