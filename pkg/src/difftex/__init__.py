"""difftex: differential testing of TeX engines and TeX Live distributions.

The pipeline fetches arXiv source bundles, compiles each one across a
matrix of engines and distribution years, extracts comparable layers from
the resulting PDFs (pixels, text, fonts, local features), classifies any
differences into a small taxonomy, and aggregates campaign-level reports.
"""

from __future__ import annotations

__version__ = "0.1.0"
