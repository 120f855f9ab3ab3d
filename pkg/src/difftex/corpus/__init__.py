"""Corpus acquisition: arXiv querying, source download, unpacking,
entry point discovery, and source reconditioning."""

from __future__ import annotations

from .model import ArxivId, ReconditionProfile, SourceBundle, TaxonomyQuery
from .arxiv import ArxivClient, fetch_source, query_taxonomy
from .archive import extract_archive
from .texscan import detect_documentclass, identify_entrypoints
from .recondition import find_banned_spans, recondition

__all__ = [
    "ArxivId",
    "ArxivClient",
    "ReconditionProfile",
    "SourceBundle",
    "TaxonomyQuery",
    "detect_documentclass",
    "extract_archive",
    "fetch_source",
    "find_banned_spans",
    "identify_entrypoints",
    "query_taxonomy",
    "recondition",
]
