"""Removal of engine-specific primitives from TeX sources.

Cleaning is line-based and conservative: only uncommented occurrences
are touched, untouched lines survive byte-for-byte (files round-trip
through Latin-1, which preserves every byte), and running the cleaner
on its own output changes nothing.
"""

from __future__ import annotations

import re
import shutil
from dataclasses import replace
from pathlib import Path

from .model import ReconditionProfile, SourceBundle


def _comment_start(line: str) -> int:
    """Index of the first unescaped ``%``, or len(line)."""
    for i, c in enumerate(line):
        if c == "%" and (i == 0 or line[i - 1] != "\\"):
            return i
    return len(line)


def _escaped(line: str, i: int) -> bool:
    """True when line[i] sits behind an odd run of backslashes."""
    n = 0
    while i - n - 1 >= 0 and line[i - n - 1] == "\\":
        n += 1
    return n % 2 == 1


def _statement_end(line: str, start: int) -> int:
    """Extend a control word at ``start`` over trailing brace groups.

    Scanning stays inside the line; an argument left open at end of
    line is not consumed.
    """
    pos = start
    while True:
        probe = pos
        while probe < len(line) and line[probe] in " \t":
            probe += 1
        if probe >= len(line) or line[probe] != "{" or _escaped(line, probe):
            return pos
        depth = 0
        i = probe
        closed = -1
        while i < len(line):
            c = line[i]
            if c == "{" and not _escaped(line, i):
                depth += 1
            elif c == "}" and not _escaped(line, i):
                depth -= 1
                if depth == 0:
                    closed = i
                    break
            i += 1
        if closed < 0:
            return pos
        pos = closed + 1


def _banned_re(names: tuple[str, ...]) -> re.Pattern[str]:
    alt = "|".join(re.escape(n) for n in sorted(names, key=len, reverse=True))
    return re.compile(r"\\(?:" + alt + r")(?![A-Za-z@])")


def find_banned_spans(
    text: str, names: tuple[str, ...]
) -> list[tuple[int, int, int]]:
    """Locate uncommented banned statements in ``text``.

    Returns (line_index, start, end) triples; the span covers the
    control word plus any same-line balanced brace arguments.
    """
    pattern = _banned_re(names)
    spans = []
    for lineno, line in enumerate(text.splitlines()):
        limit = _comment_start(line)
        for m in pattern.finditer(line):
            if m.start() >= limit:
                break
            if _escaped(line, m.start()):
                continue
            spans.append((lineno, m.start(), _statement_end(line, m.end())))
    return spans


def count_commented(text: str, names: tuple[str, ...]) -> int:
    """Occurrences of banned names that sit inside comments."""
    pattern = _banned_re(names)
    total = 0
    for line in text.splitlines():
        limit = _comment_start(line)
        total += sum(1 for m in pattern.finditer(line) if m.start() >= limit)
    return total


def _clean_line(line: str, pattern: re.Pattern[str], policy: str) -> str | None:
    """Apply the policy to one line (no terminator).  None drops the line."""
    limit = _comment_start(line)
    hits = [
        m
        for m in pattern.finditer(line)
        if m.start() < limit and not _escaped(line, m.start())
    ]
    if not hits:
        return line
    if policy == "delete-line":
        return None
    if policy == "comment-out":
        return "% " + line
    out = line
    for m in reversed(hits):
        end = _statement_end(out, m.end())
        out = out[: m.start()] + "{}" + out[end:]
    return out


def clean_text(text: str, profile: ReconditionProfile) -> str:
    pattern = _banned_re(profile.banned_primitives)
    pieces = []
    for raw in text.splitlines(keepends=True):
        body = raw.rstrip("\n\r")
        eol = raw[len(body):]
        cleaned = _clean_line(body, pattern, profile.replacement_policy)
        if cleaned is not None:
            pieces.append(cleaned + eol)
    return "".join(pieces)


def recondition(
    bundle: SourceBundle,
    profile: ReconditionProfile | None = None,
    dest: Path | None = None,
) -> SourceBundle:
    """Write a cleaned parallel tree and describe it as a new bundle.

    The original tree is never modified.  Files whose extension is not
    in ``profile.scan_extensions`` are copied byte-identically.
    """
    profile = profile or ReconditionProfile()
    root = bundle.root_dir
    if dest is None:
        dest = root.with_name(root.name + "-clean")
    dest.mkdir(parents=True, exist_ok=True)
    for src in sorted(root.rglob("*")):
        rel = src.relative_to(root)
        target = dest / rel
        if src.is_dir():
            target.mkdir(parents=True, exist_ok=True)
            continue
        if not src.is_file():
            continue
        target.parent.mkdir(parents=True, exist_ok=True)
        if src.suffix.lower() in profile.scan_extensions:
            text = src.read_bytes().decode("latin-1")
            target.write_bytes(clean_text(text, profile).encode("latin-1"))
        else:
            shutil.copyfile(src, target)
    return replace(bundle, root_dir=dest, reconditioned=True)


def verify_clean(tree: Path, profile: ReconditionProfile) -> list[Path]:
    """Paths under ``tree`` that still hold uncommented banned statements."""
    dirty = []
    for path in sorted(tree.rglob("*")):
        if not path.is_file() or path.suffix.lower() not in profile.scan_extensions:
            continue
        text = path.read_bytes().decode("latin-1")
        if find_banned_spans(text, profile.banned_primitives):
            dirty.append(path)
    return dirty


__all__ = [
    "clean_text",
    "count_commented",
    "find_banned_spans",
    "recondition",
    "verify_clean",
]
