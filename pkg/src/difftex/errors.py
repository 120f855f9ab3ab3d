"""Exception types shared across the difftex pipeline."""

from __future__ import annotations


class DifftexError(Exception):
    """Base class for every error difftex raises on purpose."""


class NetworkError(DifftexError):
    """Transport kept failing after bounded retries."""


class ApiError(DifftexError):
    """The metadata API answered with something we cannot interpret."""


class NotFound(DifftexError):
    """The requested paper has no downloadable source."""


class CorruptArchive(DifftexError):
    """A source blob could not be recognised or unpacked."""


class UnsafePath(DifftexError):
    """An archive member would land outside the extraction root."""


class NoEntrypoint(DifftexError):
    """No compilable .tex entry point was found in a source tree."""


class ClassNotFound(DifftexError):
    """No document class declaration was found in the import closure."""


class PdfParseError(DifftexError):
    """A PDF could not be parsed: malformed, encrypted, or unsupported."""


class PageOutOfRange(DifftexError, IndexError):
    """A requested page index does not exist in the document."""


class ConfigError(DifftexError):
    """A campaign configuration file or flag set is invalid."""


class CompileEnvironmentError(DifftexError):
    """The compile environment itself is unusable (no container runtime,
    missing image).  Distinct from a failed job: the job never ran, and
    retrying on a repaired host is expected to succeed."""


class EmptyCampaign(DifftexError):
    """An aggregation was asked to summarise zero records."""


class IncompleteCampaign(DifftexError):
    """A report or export needs records the campaign store does not hold."""
