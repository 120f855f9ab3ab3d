"""Campaign aggregation: success rates, pairwise splits, breakdowns.

Input records are small frozen rows (bundle id, axis labels, verdict)
so the aggregators stay independent of how a campaign was stored.  All
aggregations are permutation invariant and all percentages are rounded
to one decimal, half away from zero.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .classify import Kind, Status, Verdict
from .errors import EmptyCampaign, IncompleteCampaign

SCHEMA_VERSION = 1

ENGINE_ORDER = ("pdftex", "xetex", "luatex")

VERSION_PAIRS = (
    ("2020", "2021"),
    ("2021", "2022"),
    ("2022", "2023"),
    ("2020", "2023"),
)

DEFAULT_MIN_GROUP_SIZE = 7

PATTERN_YES = "✓"
PATTERN_NO = "✗"


def round1(x: float) -> float:
    """Round to one decimal, ties away from zero."""
    return float(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _pct(k: int, n: int) -> float:
    return round1(100.0 * k / n)


# ------------------------------------------------------------- records


@dataclass(frozen=True)
class CompileOutcomeRecord:
    bundle_id: str
    engine: str
    success: bool


@dataclass(frozen=True)
class VerdictRecord:
    bundle_id: str
    pair: tuple[str, str]  # axis labels: engine names or distribution years
    verdict: Verdict


# ------------------------------------------------- compile success rates


@dataclass(frozen=True)
class CompileRates:
    engines: tuple[str, ...]
    totals: dict[str, int]
    successes: dict[str, int]
    success_pct: dict[str, float]
    # Exact engine subsets: which combination each document succeeded on.
    intersections: dict[frozenset[str], int]


def _engine_sort_key(name: str):
    try:
        return (ENGINE_ORDER.index(name), name)
    except ValueError:
        return (len(ENGINE_ORDER), name)


def compile_rate_table(records: list[CompileOutcomeRecord]) -> CompileRates:
    """Per-engine success percentages plus exact subset counts.

    A document lands in exactly one intersection bucket: the set of
    engines it built on.  Duplicate records for one (document, engine)
    cell are conjoined, so any recorded failure keeps the cell failed.
    """
    if not records:
        raise EmptyCampaign("no compile records")
    ok: dict[tuple[str, str], bool] = {}
    for r in records:
        key = (r.bundle_id, r.engine)
        ok[key] = ok.get(key, True) and r.success
    engines = sorted({e for _, e in ok}, key=_engine_sort_key)
    bundles = sorted({b for b, _ in ok})
    totals = {e: 0 for e in engines}
    successes = {e: 0 for e in engines}
    intersections: Counter[frozenset[str]] = Counter()
    for b in bundles:
        succeeded = frozenset(e for e in engines if ok.get((b, e), False))
        for e in engines:
            if (b, e) in ok:
                totals[e] += 1
                if ok[(b, e)]:
                    successes[e] += 1
        if succeeded:
            intersections[succeeded] += 1
    return CompileRates(
        engines=tuple(engines),
        totals=totals,
        successes=successes,
        success_pct={e: _pct(successes[e], totals[e]) for e in engines if totals[e]},
        intersections=dict(intersections),
    )


# ------------------------------------------------------ pairwise summary


@dataclass(frozen=True)
class PairwiseSummary:
    pair: tuple[str, str]
    total: int
    identical: int
    different: int
    failures: int
    identical_pct: float
    different_pct: float
    failure_pct: float


def pairwise_summary(records: list[VerdictRecord], pair: tuple[str, str]) -> PairwiseSummary:
    """Identical / different / failure split for one axis pair."""
    chosen = [r.verdict.status for r in records if r.pair == pair]
    if not chosen:
        raise EmptyCampaign(f"no verdicts for pair {pair[0]} vs {pair[1]}")
    n = len(chosen)
    ident = sum(s is Status.IDENTICAL for s in chosen)
    diff = sum(s is Status.DIFFERENT for s in chosen)
    fail = n - ident - diff
    return PairwiseSummary(
        pair=pair,
        total=n,
        identical=ident,
        different=diff,
        failures=fail,
        identical_pct=_pct(ident, n),
        different_pct=_pct(diff, n),
        failure_pct=_pct(fail, n),
    )


# ------------------------------------------------------- class breakdown


@dataclass(frozen=True)
class BreakdownRow:
    group_label: str  # document class, or "All compiled"
    n: int
    kind_counts: dict[Kind, int]
    kind_pct: dict[Kind, float]


def _breakdown_row(label: str, verdicts: list[Verdict]) -> BreakdownRow:
    n = len(verdicts)
    counts = {k: sum(k in v.kinds for v in verdicts) for k in Kind}
    return BreakdownRow(
        group_label=label,
        n=n,
        kind_counts=counts,
        kind_pct={k: _pct(c, n) for k, c in counts.items()},
    )


def class_breakdown(
    records: list[VerdictRecord],
    class_map: dict[str, str],
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE,
) -> list[BreakdownRow]:
    """Per-document-class difference rates for one axis pair.

    Compile failures are excluded throughout: percentages are shares of
    the documents that actually produced two PDFs to compare.  The
    leading "All compiled" row spans every compared document, including
    those in classes too small to get their own row.
    """
    compared = [r for r in records if r.verdict.status is not Status.COMPILE_FAILURE]
    rows = [_breakdown_row("All compiled", [r.verdict for r in compared])]
    groups: dict[str, list[Verdict]] = defaultdict(list)
    for r in compared:
        groups[class_map.get(r.bundle_id, "unknown")].append(r.verdict)
    eligible = [(lbl, vs) for lbl, vs in groups.items() if len(vs) >= min_group_size]
    eligible.sort(key=lambda item: (-len(item[1]), item[0]))
    rows.extend(_breakdown_row(lbl, vs) for lbl, vs in eligible)
    return rows


# ---------------------------------------------------- stability patterns


@dataclass(frozen=True)
class StabilityTable:
    pairs: tuple[tuple[str, str], ...]
    total: int  # documents with a complete pattern
    counts: dict[tuple[bool, ...], int]  # True = identical output
    pct: dict[tuple[bool, ...], float]


def pattern_label(bits: tuple[bool, ...]) -> str:
    return "".join(PATTERN_YES if b else PATTERN_NO for b in bits)


def stability_patterns(
    records: list[VerdictRecord],
    pairs: tuple[tuple[str, str], ...] = VERSION_PAIRS,
) -> StabilityTable:
    """Bucket documents by their identical/different pattern over ``pairs``.

    Every document must carry a verdict for each pair; a missing verdict
    raises IncompleteCampaign.  Documents with a compile failure in any
    pair have no pattern and are left out of the percentages.
    """
    by_doc: dict[str, dict[tuple[str, str], Verdict]] = defaultdict(dict)
    for r in records:
        if r.pair in pairs:
            by_doc[r.bundle_id][r.pair] = r.verdict
    counts: Counter[tuple[bool, ...]] = Counter()
    for bundle, verdicts in sorted(by_doc.items()):
        missing = [p for p in pairs if p not in verdicts]
        if missing:
            a, b = missing[0]
            raise IncompleteCampaign(f"{bundle} lacks a verdict for {a} vs {b}")
        if any(verdicts[p].status is Status.COMPILE_FAILURE for p in pairs):
            continue
        bits = tuple(verdicts[p].status is Status.IDENTICAL for p in pairs)
        counts[bits] += 1
    total = sum(counts.values())
    return StabilityTable(
        pairs=pairs,
        total=total,
        counts=dict(counts),
        pct={bits: _pct(c, total) for bits, c in counts.items()},
    )


# ---------------------------------------------------- kind intersections


def kind_intersections(records: list[VerdictRecord]) -> dict[frozenset[Kind], int]:
    """Exact kind-set counts over the Different verdicts of one pair."""
    counts: Counter[frozenset[Kind]] = Counter()
    for r in records:
        if r.verdict.status is Status.DIFFERENT:
            counts[r.verdict.kinds] += 1
    return dict(counts)


# ------------------------------------------------------------- emission


@dataclass(frozen=True)
class Table:
    name: str  # file-safe slug
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    # Markdown hides rows whose value in this column is zero (data
    # formats keep them); None shows everything.
    zero_suppress_column: str | None = None


@dataclass(frozen=True)
class Report:
    campaign: str
    tables: tuple[Table, ...]


def compile_rates_table(rates: CompileRates) -> Table:
    rows = [
        (e, rates.totals[e], rates.successes[e], rates.success_pct.get(e, 0.0))
        for e in rates.engines
    ]
    return Table(
        name="compile_rates",
        title="Compilation success by engine",
        columns=("engine", "documents", "succeeded", "success_pct"),
        rows=tuple(rows),
    )


def compile_intersections_table(rates: CompileRates) -> Table:
    rows = sorted(
        (("+".join(sorted(s, key=_engine_sort_key)), c) for s, c in rates.intersections.items()),
        key=lambda row: (-row[1], row[0]),
    )
    return Table(
        name="compile_intersections",
        title="Documents by exact engine-success set",
        columns=("engines", "documents"),
        rows=tuple(rows),
    )


def pairwise_table(summaries: list[PairwiseSummary]) -> Table:
    rows = [
        (
            f"{s.pair[0]} vs {s.pair[1]}",
            s.total,
            s.identical_pct,
            s.different_pct,
            s.failure_pct,
        )
        for s in summaries
    ]
    return Table(
        name="pairwise",
        title="Pairwise comparison results (%)",
        columns=("pair", "documents", "identical_pct", "different_pct", "failure_pct"),
        rows=tuple(rows),
    )


def breakdown_table(rows: list[BreakdownRow]) -> Table:
    cols = ("class", "n") + tuple(k.value for k in Kind)
    data = [
        (r.group_label, r.n) + tuple(r.kind_pct[k] for k in Kind) for r in rows
    ]
    return Table(
        name="classes",
        title="Differences across document classes (%)",
        columns=cols,
        rows=tuple(data),
    )


def stability_table(stab: StabilityTable) -> Table:
    all_bits = sorted(
        (tuple(bool(int(c)) for c in format(i, f"0{len(stab.pairs)}b")) for i in range(2 ** len(stab.pairs))),
        key=lambda bits: (-stab.counts.get(bits, 0), pattern_label(bits)),
    )
    rows = [
        (pattern_label(bits), stab.counts.get(bits, 0), stab.pct.get(bits, 0.0))
        for bits in all_bits
    ]
    return Table(
        name="stability",
        title="Output stability across distributions",
        columns=("pattern", "documents", "pct"),
        rows=tuple(rows),
        zero_suppress_column="documents",
    )


def intersections_table(counts: dict[frozenset[Kind], int]) -> Table:
    rows = sorted(
        (("+".join(sorted(k.value for k in subset)), c) for subset, c in counts.items()),
        key=lambda row: (-row[1], row[0]),
    )
    return Table(
        name="kind_intersections",
        title="Documents by exact difference-kind set",
        columns=("kinds", "documents"),
        rows=tuple(rows),
    )


def _atomic_write_text(dest: Path, text: str) -> None:
    tmp = dest.with_suffix(dest.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    tmp.replace(dest)


def _emit_json(report: Report, dest_dir: Path) -> list[Path]:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "campaign": report.campaign,
        "tables": [
            {
                "name": t.name,
                "title": t.title,
                "columns": list(t.columns),
                "rows": [list(row) for row in t.rows],
                "zero_suppress_column": t.zero_suppress_column,
            }
            for t in report.tables
        ],
    }
    out = dest_dir / "report.json"
    _atomic_write_text(out, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return [out]


def _emit_csv(report: Report, dest_dir: Path) -> list[Path]:
    written = []
    for t in report.tables:
        out = dest_dir / f"{t.name}.csv"
        tmp = out.with_suffix(".csv.tmp")
        with tmp.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
            w.writerow(t.columns)
            w.writerows(t.rows)
        tmp.replace(out)
        written.append(out)
    return written


def _markdown_cell(value) -> str:
    return str(value).replace("|", "\\|")


def _emit_markdown(report: Report, dest_dir: Path) -> list[Path]:
    lines = [f"# Campaign report: {report.campaign}", ""]
    for t in report.tables:
        rows = t.rows
        if t.zero_suppress_column is not None:
            idx = t.columns.index(t.zero_suppress_column)
            rows = tuple(r for r in rows if r[idx] != 0)
        lines.append(f"## {t.title}")
        lines.append("")
        lines.append("| " + " | ".join(t.columns) + " |")
        lines.append("|" + "|".join(" --- " for _ in t.columns) + "|")
        for row in rows:
            lines.append("| " + " | ".join(_markdown_cell(c) for c in row) + " |")
        lines.append("")
    out = dest_dir / "report.md"
    _atomic_write_text(out, "\n".join(lines))
    return [out]


_EMITTERS = {"json": _emit_json, "csv": _emit_csv, "markdown": _emit_markdown}


def emit(report: Report, fmt: str, dest_dir: Path) -> list[Path]:
    """Write a report under ``dest_dir``; returns the files written.

    Emission is deterministic: the same report yields byte-identical
    files.  CSV follows RFC 4180 quoting with CRLF rows.
    """
    if fmt not in _EMITTERS:
        raise ValueError(f"unknown report format: {fmt!r}")
    dest_dir.mkdir(parents=True, exist_ok=True)
    return _EMITTERS[fmt](report, dest_dir)


def load_report_json(path: Path) -> Report:
    data = json.loads(path.read_text(encoding="utf-8"))
    tables = tuple(
        Table(
            name=t["name"],
            title=t["title"],
            columns=tuple(t["columns"]),
            rows=tuple(tuple(row) for row in t["rows"]),
            zero_suppress_column=t.get("zero_suppress_column"),
        )
        for t in data["tables"]
    )
    return Report(campaign=data["campaign"], tables=tables)
