"""Command-line driver for the differential-build pipeline.

Subcommands map to pipeline stages: ``fetch`` assembles a corpus,
``run`` executes the build matrix and produces verdicts, ``compare``
and ``classify`` operate on two PDFs directly, ``report`` aggregates a
campaign store, and ``triage`` exports papers matching a selector.

Exit codes: 0 success, 2 configuration error, 3 environment error,
4 incomplete or empty campaign, 130 interrupted (progress is kept).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .classify import PaperOutcome, Verdict, classify, triage_export
from .compare import PairwiseComparison, compare_pair
from .compiling import (
    CampaignStore,
    CliContainerRuntime,
    CompileResult,
    plan_jobs,
    run_campaign,
)
from .config import CampaignConfig, load_config
from .corpus.archive import extract_archive
from .corpus.arxiv import ArxivClient
from .corpus.model import SourceBundle, read_manifest, write_manifest
from .corpus.recondition import recondition
from .corpus.texscan import detect_documentclass, identify_entrypoints
from .errors import (
    ClassNotFound,
    CompileEnvironmentError,
    ConfigError,
    DifftexError,
    EmptyCampaign,
    IncompleteCampaign,
    NoEntrypoint,
)
from .extract import extract_all
from .report import (
    VERSION_PAIRS,
    CompileOutcomeRecord,
    Report,
    VerdictRecord,
    breakdown_table,
    class_breakdown,
    compile_intersections_table,
    compile_rate_table,
    compile_rates_table,
    emit,
    intersections_table,
    kind_intersections,
    pairwise_summary,
    pairwise_table,
    stability_patterns,
    stability_table,
)

ENGINES_AXIS_BASELINE = "xetex"
VERSIONS_AXIS_ENGINE = "pdftex"


class CampaignPaths:
    """Fixed layout of one campaign's on-disk state."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.manifest = root / "manifest.json"
        self.sources = root / "sources"
        self.cleaned = root / "cleaned"
        self.compile_store = root / "compile"
        self.work = root / "work"
        self.comparisons = root / "comparisons"
        self.reports = root / "reports"
        self.triage = root / "triage"


def _say(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _err(message: str) -> None:
    print(f"difftex: {message}", file=sys.stderr)


# --------------------------------------------------------------- fetch


def _finalize_bundle(bundle: SourceBundle) -> SourceBundle:
    """Attach entry point and document class where they can be found."""
    try:
        bundle = bundle.with_entrypoint(identify_entrypoints(bundle)[0])
    except NoEntrypoint:
        return bundle
    try:
        bundle = replace(bundle, document_class=detect_documentclass(bundle))
    except ClassNotFound:
        pass
    return bundle


def scan_local_corpus(local_dir: Path) -> list[SourceBundle]:
    """Treat each subdirectory of ``local_dir`` as one source bundle."""
    if not local_dir.is_dir():
        raise ConfigError(f"local corpus directory not found: {local_dir}")
    bundles = []
    for sub in sorted(p for p in local_dir.iterdir() if p.is_dir()):
        bundles.append(
            _finalize_bundle(
                SourceBundle(bundle_id=sub.name, root_dir=sub, taxonomy="local")
            )
        )
    if not bundles:
        raise ConfigError(f"no bundle directories under {local_dir}")
    return bundles


def _fetch_remote(cfg: CampaignConfig, paths: CampaignPaths, args) -> list[SourceBundle]:
    client = ArxivClient()
    blob_cache = cfg.cache_root / "blobs"
    bundles = []
    for query in cfg.queries():
        ids = client.query_taxonomy(query)
        _say(args, f"{query.taxonomy}: {len(ids)} papers listed")
        for pid in ids:
            dest = paths.sources / str(pid)
            if dest.is_dir():
                bundle = SourceBundle(
                    bundle_id=str(pid), root_dir=dest, taxonomy=query.taxonomy
                )
            else:
                blob = client.fetch_source(pid, blob_cache)
                bundle = extract_archive(
                    blob, dest, bundle_id=str(pid), taxonomy=query.taxonomy
                )
            bundles.append(_finalize_bundle(bundle))
    return bundles


def cmd_fetch(cfg: CampaignConfig, args) -> int:
    paths = CampaignPaths(cfg.output_root)
    paths.root.mkdir(parents=True, exist_ok=True)
    if cfg.local_dir is not None:
        bundles = scan_local_corpus(cfg.local_dir)
    elif cfg.taxonomies:
        bundles = _fetch_remote(cfg, paths, args)
    else:
        raise ConfigError("fetch needs either corpus.local_dir or corpus.taxonomies")
    write_manifest(bundles, paths.manifest)
    with_entry = sum(1 for b in bundles if b.entrypoint is not None)
    _say(
        args,
        f"manifest: {len(bundles)} bundles ({with_entry} compilable) -> {paths.manifest}",
    )
    return 0


# ----------------------------------------------------------------- run


def _recondition_stage(cfg, paths, bundles, args) -> list[SourceBundle]:
    profile = cfg.recondition_profile()
    cleaned = []
    for bundle in bundles:
        dest = paths.cleaned / bundle.bundle_id
        if dest.is_dir():
            cleaned.append(replace(bundle, root_dir=dest, reconditioned=True))
        else:
            cleaned.append(recondition(bundle, profile, dest))
    _say(args, f"reconditioned {len(cleaned)} bundles")
    return cleaned


def _comparison_tasks(cfg: CampaignConfig):
    """Yield (axis, labels, side_a, side_b) where a side is (engine, year)."""
    tasks = []
    years = sorted(cfg.years)
    latest = years[-1]
    engines = list(cfg.engines)
    if ENGINES_AXIS_BASELINE in engines:
        for other in engines:
            if other != ENGINES_AXIS_BASELINE:
                tasks.append(
                    (
                        "engines",
                        (ENGINES_AXIS_BASELINE, other),
                        (ENGINES_AXIS_BASELINE, latest),
                        (other, latest),
                    )
                )
    versions_engine = (
        VERSIONS_AXIS_ENGINE if VERSIONS_AXIS_ENGINE in engines else engines[0]
    )
    for year_a, year_b in VERSION_PAIRS:
        if int(year_a) in years and int(year_b) in years:
            tasks.append(
                (
                    "versions",
                    (year_a, year_b),
                    (versions_engine, int(year_a)),
                    (versions_engine, int(year_b)),
                )
            )
    return tasks


def _signal_summary(comp: PairwiseComparison) -> dict:
    return {
        "page_counts": [comp.pixel.page_count_a, comp.pixel.page_count_b],
        "differing_pages": comp.pixel.differing_pages,
        "edit_distance": comp.text.edit_distance,
        "char_counts": [comp.text.char_count_a, comp.text.char_count_b],
        "font_counts": [comp.font.count_a, comp.font.count_b],
        "min_feature_score": comp.feature.min_score,
        "image_counts": [comp.image.count_a, comp.image.count_b],
        "image_max_displacement_pt": comp.image.max_displacement,
    }


def _record_name(bundle_id: str, labels: tuple[str, str]) -> str:
    safe = bundle_id.replace("/", "_")
    return f"{safe}__{labels[0]}-vs-{labels[1]}.json"


def _compare_stage(cfg, paths, bundles, results: list[CompileResult], args) -> int:
    by_cell: dict[tuple[str, str, int], CompileResult] = {}
    for r in results:
        cell = (r.job.bundle_id, r.job.engine.name, r.job.distribution.year)
        by_cell[cell] = r
    paths.comparisons.mkdir(parents=True, exist_ok=True)
    extract_cache = cfg.cache_root / "extract"
    written = 0
    for bundle in bundles:
        for axis, labels, side_a, side_b in _comparison_tasks(cfg):
            record_path = paths.comparisons / _record_name(bundle.bundle_id, labels)
            if record_path.is_file():
                continue
            res_a = by_cell.get((bundle.bundle_id, *side_a))
            res_b = by_cell.get((bundle.bundle_id, *side_b))
            if res_a is None or res_b is None:
                continue
            record = {
                "bundle_id": bundle.bundle_id,
                "axis": axis,
                "pair": list(labels),
                "document_class": bundle.document_class,
                "sides": {
                    "a": {"engine": side_a[0], "year": side_a[1], "status": res_a.status},
                    "b": {"engine": side_b[0], "year": side_b[1], "status": res_b.status},
                },
            }
            if not (res_a.success and res_b.success):
                record["verdict"] = Verdict.compile_failure().to_json()
            else:
                arts = [
                    extract_all(
                        res.pdf_path,
                        dpi=cfg.dpi,
                        edge_pages=cfg.edge_pages,
                        cache_dir=extract_cache,
                    )
                    for res in (res_a, res_b)
                ]
                comp = compare_pair(
                    arts[0],
                    arts[1],
                    edit_cap=cfg.edit_cap,
                    feature_threshold=cfg.feature_threshold,
                    image_displacement_pt=cfg.image_displacement_pt,
                    pixel_tolerance=cfg.pixel_tolerance,
                )
                verdict = classify(
                    comp,
                    content_threshold=cfg.content_threshold,
                    style_text_tolerance=cfg.style_text_tolerance,
                )
                record["verdict"] = verdict.to_json()
                record["summary"] = _signal_summary(comp)
            tmp = record_path.with_suffix(".json.tmp")
            tmp.write_text(
                json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            tmp.replace(record_path)
            written += 1
    return written


def _print_plan(jobs) -> None:
    for job in jobs:
        print(
            f"{job.bundle_id}  {job.engine.name:7s} {job.distribution.year}  "
            f"{job.distribution.image_ref}  {' '.join(job.argv)}"
        )


def cmd_run(cfg: CampaignConfig, args) -> int:
    paths = CampaignPaths(cfg.output_root)
    if paths.manifest.is_file():
        bundles = read_manifest(paths.manifest)
    else:
        if cfg.local_dir is None and not cfg.taxonomies:
            raise ConfigError(
                f"no manifest at {paths.manifest} and no corpus spec to fetch one"
            )
        cmd_fetch(cfg, args)
        bundles = read_manifest(paths.manifest)
    usable = [b for b in bundles if b.entrypoint is not None]
    if not usable:
        raise ConfigError("no compilable bundles in the manifest")

    cleaned = _recondition_stage(cfg, paths, usable, args)
    engines = cfg.engine_objects()
    dists = cfg.distribution_objects()
    jobs = []
    for bundle in cleaned:
        jobs.extend(plan_jobs(bundle, engines, dists, cfg.timeout_s))
    if args.dry_run:
        _print_plan(jobs)
        print(f"{len(jobs)} jobs planned; nothing executed")
        return 0

    runtime = CliContainerRuntime(args.runtime)
    store = CampaignStore(paths.compile_store)
    results = run_campaign(jobs, store, runtime, paths.work, cfg.parallelism)
    succeeded = sum(1 for r in results if r.success)
    _say(args, f"compiled: {succeeded}/{len(results)} jobs succeeded")

    written = _compare_stage(cfg, paths, cleaned, results, args)
    _say(args, f"comparisons: {written} new records -> {paths.comparisons}")
    return 0


# ------------------------------------------------- compare and classify


def _compare_two(cfg: CampaignConfig, pdf_a: str, pdf_b: str) -> PairwiseComparison:
    arts = [
        extract_all(Path(p), dpi=cfg.dpi, edge_pages=cfg.edge_pages)
        for p in (pdf_a, pdf_b)
    ]
    return compare_pair(
        arts[0],
        arts[1],
        edit_cap=cfg.edit_cap,
        feature_threshold=cfg.feature_threshold,
        image_displacement_pt=cfg.image_displacement_pt,
        pixel_tolerance=cfg.pixel_tolerance,
    )


def cmd_compare(cfg: CampaignConfig, args) -> int:
    comp = _compare_two(cfg, args.pdf_a, args.pdf_b)
    print(json.dumps(_signal_summary(comp), indent=2, sort_keys=True))
    return 0


def cmd_classify(cfg: CampaignConfig, args) -> int:
    comp = _compare_two(cfg, args.pdf_a, args.pdf_b)
    verdict = classify(
        comp,
        content_threshold=cfg.content_threshold,
        style_text_tolerance=cfg.style_text_tolerance,
    )
    print(json.dumps(verdict.to_json(), indent=2, sort_keys=True))
    return 0


# -------------------------------------------------------------- report


def _load_comparison_records(paths: CampaignPaths) -> list[dict]:
    records = []
    for path in sorted(paths.comparisons.glob("*.json")):
        records.append(json.loads(path.read_text(encoding="utf-8")))
    return records


def _verdict_records(records: list[dict]) -> list[VerdictRecord]:
    return [
        VerdictRecord(
            bundle_id=r["bundle_id"],
            pair=tuple(r["pair"]),
            verdict=Verdict.from_json(r["verdict"]),
        )
        for r in records
    ]


def _parse_pair(text: str) -> tuple[str, str]:
    parts = text.split(":")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"pair must look like a:b, got {text!r}")
    return (parts[0], parts[1])


def _default_pair(records: list[dict]) -> tuple[str, str]:
    pairs = [tuple(r["pair"]) for r in records]
    preferred = (ENGINES_AXIS_BASELINE, VERSIONS_AXIS_ENGINE)
    if preferred in pairs:
        return preferred
    return pairs[0]


def _ordered_pairs(records: list[dict]) -> list[tuple[str, str]]:
    seen = []
    for r in records:
        pair = tuple(r["pair"])
        if pair not in seen:
            seen.append(pair)
    return sorted(seen, key=lambda p: (p not in VERSION_PAIRS, p))


def cmd_report(cfg: CampaignConfig, args) -> int:
    paths = CampaignPaths(cfg.output_root)
    records = _load_comparison_records(paths)
    if not records:
        raise IncompleteCampaign("no comparison records; run the campaign first")
    vrecs = _verdict_records(records)
    class_map = {
        r["bundle_id"]: r.get("document_class") or "unknown" for r in records
    }
    which = set(args.table) if args.table else {"all"}
    if getattr(args, "all_tables", False):
        which = {"all"}
    if "all" in which:
        which = {"compile", "pairwise", "classes", "stability", "intersections"}
    pair = _parse_pair(args.pair) if args.pair else _default_pair(records)
    pair_records = [v for v in vrecs if v.pair == pair]

    tables = []
    if "compile" in which:
        store = CampaignStore(paths.compile_store)
        latest = max(cfg.years)
        compile_recs = [
            CompileOutcomeRecord(r.job.bundle_id, r.job.engine.name, r.success)
            for r in store.load_all()
            if r.job.distribution.year == latest
        ]
        if compile_recs:
            rates = compile_rate_table(compile_recs)
            tables.append(compile_rates_table(rates))
            tables.append(compile_intersections_table(rates))
    if "pairwise" in which:
        summaries = [pairwise_summary(vrecs, p) for p in _ordered_pairs(records)]
        tables.append(pairwise_table(summaries))
    if "classes" in which:
        if not pair_records:
            raise IncompleteCampaign(f"no records for pair {pair[0]} vs {pair[1]}")
        tables.append(
            breakdown_table(
                class_breakdown(pair_records, class_map, args.min_group_size)
            )
        )
    if "stability" in which:
        version_pairs = tuple(
            p
            for p in VERSION_PAIRS
            if int(p[0]) in cfg.years and int(p[1]) in cfg.years
        )
        version_records = [v for v in vrecs if v.pair in version_pairs]
        if not version_records:
            raise IncompleteCampaign("no version-axis records for a stability table")
        tables.append(stability_table(stability_patterns(version_records, version_pairs)))
    if "intersections" in which:
        if not pair_records:
            raise IncompleteCampaign(f"no records for pair {pair[0]} vs {pair[1]}")
        tables.append(intersections_table(kind_intersections(pair_records)))

    report = Report(campaign=cfg.campaign, tables=tuple(tables))
    written = []
    for fmt in ("json", "csv", "markdown"):
        written.extend(emit(report, fmt, paths.reports))
    for path in written:
        _say(args, f"wrote {path}")
    return 0


# -------------------------------------------------------------- triage


def _paper_outcomes(cfg: CampaignConfig, paths: CampaignPaths) -> list[PaperOutcome]:
    engine = (
        VERSIONS_AXIS_ENGINE
        if VERSIONS_AXIS_ENGINE in cfg.engines
        else cfg.engines[0]
    )
    store = CampaignStore(paths.compile_store)
    compiled: dict[str, dict[int, bool]] = {}
    for r in store.load_all():
        if r.job.engine.name != engine:
            continue
        compiled.setdefault(r.job.bundle_id, {})[r.job.distribution.year] = r.success
    if not compiled:
        raise IncompleteCampaign("no compile records for the versions axis")
    years = sorted(cfg.years)
    records = _load_comparison_records(paths)
    verdicts: dict[str, dict[tuple[int, int], Verdict]] = {}
    for rec in records:
        if rec["axis"] != "versions":
            continue
        pair = (int(rec["pair"][0]), int(rec["pair"][1]))
        verdicts.setdefault(rec["bundle_id"], {})[pair] = Verdict.from_json(
            rec["verdict"]
        )
    outcomes = []
    for bundle_id in sorted(compiled):
        by_year = compiled[bundle_id]
        missing = [y for y in years if y not in by_year]
        if missing:
            raise IncompleteCampaign(
                f"{bundle_id} has no compile record for {missing[0]}"
            )
        outcomes.append(
            PaperOutcome(
                bundle_id=bundle_id,
                compiled={y: by_year[y] for y in years},
                pair_verdicts=verdicts.get(bundle_id, {}),
            )
        )
    return outcomes


def cmd_triage(cfg: CampaignConfig, args) -> int:
    paths = CampaignPaths(cfg.output_root)
    if args.failures:
        selector = "failures"
    elif args.introduced is not None:
        selector = f"introduced:{args.introduced}"
    else:
        selector = f"reverted:{args.reverted}"
    outcomes = _paper_outcomes(cfg, paths)
    dest = paths.triage / f"{selector.replace(':', '-')}.json"
    picked = triage_export(outcomes, selector, dest)
    _say(args, f"{selector}: {len(picked)} papers -> {dest}")
    return 0


# ----------------------------------------------------------- arg parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difftex",
        description="Differential testing of TeX engines and distributions.",
    )
    parser.add_argument("--config", type=Path, help="campaign YAML file")
    parser.add_argument("--output-root", type=Path, help="campaign state directory")
    parser.add_argument("--cache-root", type=Path, help="download and extract cache")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="assemble the corpus manifest")
    p.add_argument("--taxonomy", action="append", help="repeatable category filter")
    p.add_argument("--year-month", help="submission month, YYYY-MM")
    p.add_argument("--limit", type=int, help="papers per taxonomy")
    p.add_argument("--local-dir", type=Path, help="use local bundle directories")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("run", help="compile the matrix and produce verdicts")
    p.add_argument("--engines", help="comma-separated engine list")
    p.add_argument("--years", help="comma-separated distribution years")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--timeout", type=int, help="per-job timeout in seconds")
    p.add_argument("--runtime", default="docker", help="container CLI binary")
    p.add_argument("--dry-run", action="store_true", help="print the job plan only")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare two PDFs and print the signals")
    p.add_argument("pdf_a")
    p.add_argument("pdf_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("classify", help="compare two PDFs and print the verdict")
    p.add_argument("pdf_a")
    p.add_argument("pdf_b")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="aggregate the campaign into tables")
    p.add_argument(
        "--table",
        action="append",
        choices=["compile", "pairwise", "classes", "stability", "intersections", "all"],
        help="repeatable table selector (default: all)",
    )
    p.add_argument(
        "--all",
        dest="all_tables",
        action="store_true",
        help="emit every table, overriding --table",
    )
    p.add_argument("--pair", help="axis pair like 2022:2023 or xetex:pdftex")
    p.add_argument("--min-group-size", type=int, default=7)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("triage", help="export papers matching a selector")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--failures", action="store_true")
    group.add_argument("--introduced", type=int, metavar="YEAR")
    group.add_argument("--reverted", type=int, metavar="YEAR")
    p.set_defaults(func=cmd_triage)

    return parser


def _overrides_from(args) -> dict:
    over: dict = {}
    over["output_root"] = getattr(args, "output_root", None)
    over["cache_root"] = getattr(args, "cache_root", None)
    over["local_dir"] = getattr(args, "local_dir", None)
    over["year_month"] = getattr(args, "year_month", None)
    over["limit"] = getattr(args, "limit", None)
    over["parallelism"] = getattr(args, "parallelism", None)
    over["timeout_s"] = getattr(args, "timeout", None)
    if getattr(args, "taxonomy", None):
        over["taxonomies"] = tuple(args.taxonomy)
    if getattr(args, "engines", None):
        over["engines"] = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    if getattr(args, "years", None):
        try:
            over["years"] = tuple(int(y) for y in args.years.split(",") if y.strip())
        except ValueError as exc:
            raise ConfigError(f"bad years list: {args.years!r}") from exc
    return over


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides_from(args))
        return args.func(cfg, args)
    except ConfigError as exc:
        _err(f"configuration error: {exc}")
        return 2
    except CompileEnvironmentError as exc:
        _err(f"environment error: {exc}")
        _err("fix the container runtime or image and rerun; finished jobs are kept")
        return 3
    except (EmptyCampaign, IncompleteCampaign) as exc:
        _err(f"incomplete campaign: {exc}")
        return 4
    except KeyboardInterrupt:
        _err("interrupted; progress is checkpointed, rerun the same command to resume")
        return 130
    except DifftexError as exc:
        _err(str(exc))
        return 1
    except OSError as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
