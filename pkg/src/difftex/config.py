"""Campaign configuration: one YAML file, flag overrides, env fallback.

Precedence, highest first: command-line overrides, the config file,
the ``DIFFTEX_CACHE`` environment variable (cache root only), built-in
defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .classify import DEFAULT_CONTENT_THRESHOLD, DEFAULT_STYLE_TEXT_TOLERANCE
from .compare import (
    DEFAULT_EDIT_CAP,
    DEFAULT_FEATURE_THRESHOLD,
    DEFAULT_IMAGE_DISPLACEMENT_PT,
)
from .compiling import (
    DEFAULT_TIMEOUT_S,
    ENGINE_FLAGS,
    SUPPORTED_YEARS,
    Distribution,
    Engine,
)
from .corpus.model import POLICIES, ReconditionProfile, TaxonomyQuery
from .errors import ConfigError
from .extract import DEFAULT_DPI, DEFAULT_EDGE_PAGES

CACHE_ENV_VAR = "DIFFTEX_CACHE"

DEFAULT_CACHE_ROOT = Path.home() / ".cache" / "difftex"


@dataclass(frozen=True)
class CampaignConfig:
    campaign: str = "campaign"
    # Corpus: either a local directory of bundles, or a fetch spec.
    local_dir: Path | None = None
    taxonomies: tuple[str, ...] = ()
    year_month: str = ""
    limit: int = 3
    # Build matrix.
    engines: tuple[str, ...] = ("pdftex", "xetex", "luatex")
    years: tuple[int, ...] = SUPPORTED_YEARS
    parallelism: int = 1
    timeout_s: int = DEFAULT_TIMEOUT_S
    images: dict[int, str] = field(default_factory=dict)
    # Extraction and comparison knobs.
    dpi: int = DEFAULT_DPI
    edge_pages: int = DEFAULT_EDGE_PAGES
    edit_cap: int = DEFAULT_EDIT_CAP
    pixel_tolerance: int = 0
    feature_threshold: float = DEFAULT_FEATURE_THRESHOLD
    content_threshold: int = DEFAULT_CONTENT_THRESHOLD
    style_text_tolerance: int = DEFAULT_STYLE_TEXT_TOLERANCE
    image_displacement_pt: float = DEFAULT_IMAGE_DISPLACEMENT_PT
    # Source cleaning.
    recondition_policy: str = "substitute-empty"
    banned_primitives: tuple[str, ...] | None = None
    # Roots.
    cache_root: Path = DEFAULT_CACHE_ROOT
    output_root: Path = Path("campaign-out")

    def __post_init__(self) -> None:
        if not self.engines:
            raise ConfigError("at least one engine is required")
        for name in self.engines:
            if name not in ENGINE_FLAGS:
                raise ConfigError(f"unknown engine: {name!r}")
        if not self.years:
            raise ConfigError("at least one distribution year is required")
        for year in self.years:
            if year not in SUPPORTED_YEARS:
                raise ConfigError(f"unsupported year: {year}")
        if not 0 < self.feature_threshold < 1:
            raise ConfigError("feature threshold must lie in (0, 1)")
        for label, value in (
            ("content threshold", self.content_threshold),
            ("style text tolerance", self.style_text_tolerance),
            ("image displacement", self.image_displacement_pt),
            ("dpi", self.dpi),
            ("edge pages", self.edge_pages),
            ("edit cap", self.edit_cap),
            ("parallelism", self.parallelism),
            ("timeout", self.timeout_s),
            ("limit", self.limit),
        ):
            if value <= 0:
                raise ConfigError(f"{label} must be positive")
        if self.pixel_tolerance < 0:
            raise ConfigError("pixel tolerance cannot be negative")
        if self.recondition_policy not in POLICIES:
            raise ConfigError(f"unknown recondition policy: {self.recondition_policy!r}")
        if self.local_dir is None and self.taxonomies and not self.year_month:
            raise ConfigError("a fetch spec needs year_month")

    # ----------------------------------------------------- conversions

    def engine_objects(self) -> list[Engine]:
        return [Engine(name) for name in self.engines]

    def distribution_objects(self) -> list[Distribution]:
        return [Distribution(y, self.images.get(y, "")) for y in sorted(self.years)]

    def recondition_profile(self) -> ReconditionProfile:
        if self.banned_primitives is None:
            return ReconditionProfile(replacement_policy=self.recondition_policy)
        return ReconditionProfile(
            banned_primitives=self.banned_primitives,
            replacement_policy=self.recondition_policy,
        )

    def queries(self) -> list[TaxonomyQuery]:
        return [
            TaxonomyQuery(taxonomy=t, year_month=self.year_month, limit=self.limit)
            for t in self.taxonomies
        ]


_PATH_KEYS = {"local_dir", "cache_root", "output_root"}
_TUPLE_KEYS = {"taxonomies", "engines", "years", "banned_primitives"}

_THRESHOLD_ALIASES = {
    "feature": "feature_threshold",
    "content_chars": "content_threshold",
    "style_chars": "style_text_tolerance",
    "image_displacement_pt": "image_displacement_pt",
}


def _flatten(data: dict) -> dict:
    """Accept the nested YAML layout and return flat config kwargs."""
    flat: dict = {}
    for key, value in data.items():
        if key == "corpus":
            if not isinstance(value, dict):
                raise ConfigError("corpus must be a mapping")
            flat.update(value)
        elif key == "thresholds":
            if not isinstance(value, dict):
                raise ConfigError("thresholds must be a mapping")
            for tkey, tval in value.items():
                if tkey not in _THRESHOLD_ALIASES:
                    raise ConfigError(f"unknown threshold: {tkey!r}")
                flat[_THRESHOLD_ALIASES[tkey]] = tval
        elif key == "recondition":
            if not isinstance(value, dict):
                raise ConfigError("recondition must be a mapping")
            if "policy" in value:
                flat["recondition_policy"] = value["policy"]
            if "banned" in value:
                flat["banned_primitives"] = value["banned"]
            extras = set(value) - {"policy", "banned"}
            if extras:
                raise ConfigError(f"unknown recondition keys: {sorted(extras)}")
        else:
            flat[key] = value
    return flat


def _coerce(flat: dict) -> dict:
    known = {f.name for f in fields(CampaignConfig)}
    unknown = set(flat) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, value in flat.items():
        if value is None:
            continue
        if key in _PATH_KEYS:
            value = Path(value).expanduser()
        elif key in _TUPLE_KEYS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            value = tuple(value)
        elif key == "images":
            if not isinstance(value, dict):
                raise ConfigError("images must map year to image reference")
            value = {int(y): str(ref) for y, ref in value.items()}
        out[key] = value
    return out


def load_config(
    path: Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> CampaignConfig:
    """Build a CampaignConfig from a YAML file plus overrides."""
    env = os.environ if env is None else env
    merged: dict = {}
    if env.get(CACHE_ENV_VAR):
        merged["cache_root"] = env[CACHE_ENV_VAR]
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        merged.update(_flatten(raw))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return CampaignConfig(**_coerce(merged))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
