"""Build-matrix planning and containerized latexmk execution.

A campaign is the cross product of source bundles, engines, and TeX
Live distributions.  Each cell runs latexmk inside the distribution's
container image against a private working copy of the source tree, and
the outcome is persisted in an append-only store so an interrupted
campaign resumes without re-running finished jobs.
"""

from __future__ import annotations

import hashlib
import json
import re
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

from .errors import CompileEnvironmentError, NoEntrypoint, PdfParseError
from .pdf import PdfDocument

ENGINE_FLAGS = {
    "pdftex": "-pdf",
    "xetex": "-pdfxe",
    "luatex": "-pdflua",
}

SUPPORTED_YEARS = (2020, 2021, 2022, 2023)

DEFAULT_IMAGE_TEMPLATE = "texlive/texlive:TL{year}-historic"

DEFAULT_TIMEOUT_S = 600

BASE_LATEXMK_FLAGS = ("-interaction=nonstopmode", "-halt-on-error")

# Years whose latexmk launched bibtex differently by default; the flag
# pins the modern behavior so version diffs reflect typesetting only.
BIBTEX_COMPAT_YEARS = (2020,)
BIBTEX_COMPAT_EXPR = "$bibtex_fudge=1;"

_BIBTEX_ERROR_RE = re.compile(rb"(?i)bibtex[^\n]*(error|fail|exited|returned)")
_ENV_ERROR_MARKERS = (
    b"Unable to find image",
    b"Cannot connect to the",
    b"executable file not found",
    b"No such image",
)


@dataclass(frozen=True)
class Engine:
    name: str

    def __post_init__(self) -> None:
        if self.name not in ENGINE_FLAGS:
            raise ValueError(f"unknown engine: {self.name!r}")

    @property
    def latexmk_flag(self) -> str:
        return ENGINE_FLAGS[self.name]


@dataclass(frozen=True)
class Distribution:
    year: int
    image_ref: str = ""

    def __post_init__(self) -> None:
        if self.year not in SUPPORTED_YEARS:
            raise ValueError(f"unsupported distribution year: {self.year}")
        if not self.image_ref:
            object.__setattr__(
                self, "image_ref", DEFAULT_IMAGE_TEMPLATE.format(year=self.year)
            )


@dataclass(frozen=True)
class CompileJob:
    bundle_id: str
    root_dir: Path
    entrypoint: Path  # relative to root_dir
    engine: Engine
    distribution: Distribution
    timeout_s: int = DEFAULT_TIMEOUT_S
    extra_flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.entrypoint.is_absolute():
            raise ValueError("entrypoint must be relative to the bundle root")

    @property
    def argv(self) -> list[str]:
        return [
            "latexmk",
            self.engine.latexmk_flag,
            *BASE_LATEXMK_FLAGS,
            *self.extra_flags,
            self.entrypoint.name,
        ]


@dataclass(frozen=True)
class CompileResult:
    job: CompileJob
    status: str  # "success" | "failure"
    failure_stage: str | None  # "latex" | "bibtex" | "timeout" | "crash"
    duration_ms: int
    log_path: Path
    pdf_path: Path | None
    page_count: int | None

    def __post_init__(self) -> None:
        if self.status == "success":
            if self.pdf_path is None or not self.page_count or self.page_count < 1:
                raise ValueError("a successful result needs a PDF and page count")
            if self.failure_stage is not None:
                raise ValueError("a successful result cannot carry a failure stage")
        elif self.status == "failure":
            if self.failure_stage not in ("latex", "bibtex", "timeout", "crash"):
                raise ValueError(f"bad failure stage: {self.failure_stage!r}")
        else:
            raise ValueError(f"bad status: {self.status!r}")

    @property
    def success(self) -> bool:
        return self.status == "success"


def compat_flags(dist: Distribution, bibtex_expr: str = BIBTEX_COMPAT_EXPR) -> tuple[str, ...]:
    """Extra latexmk flags needed to level old distributions' defaults."""
    if dist.year in BIBTEX_COMPAT_YEARS:
        return ("-e", bibtex_expr)
    return ()


def plan_jobs(
    bundle,
    engines: list[Engine],
    dists: list[Distribution],
    timeout_s: int = DEFAULT_TIMEOUT_S,
) -> list[CompileJob]:
    """One job per engine x distribution, engine-major, year-ascending."""
    if bundle.entrypoint is None:
        raise NoEntrypoint(f"bundle {bundle.bundle_id} has no entrypoint")
    jobs = []
    for engine in engines:
        for dist in sorted(dists, key=lambda d: d.year):
            jobs.append(
                CompileJob(
                    bundle_id=bundle.bundle_id,
                    root_dir=bundle.root_dir,
                    entrypoint=bundle.entrypoint,
                    engine=engine,
                    distribution=dist,
                    timeout_s=timeout_s,
                    extra_flags=compat_flags(dist),
                )
            )
    return jobs


# ------------------------------------------------------------ job keys


def bundle_tree_hash(root: Path) -> str:
    """Content hash over the source tree, stable across copies."""
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode("utf-8"))
        h.update(b"\x00")
        h.update(path.read_bytes())
        h.update(b"\x01")
    return h.hexdigest()


def job_key(job: CompileJob, tree_hash: str) -> str:
    material = "\n".join(
        (
            tree_hash,
            str(job.entrypoint),
            job.engine.name,
            str(job.distribution.year),
            job.distribution.image_ref,
            " ".join(job.extra_flags),
        )
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


# ---------------------------------------------------- container runtime


@dataclass
class RunOutcome:
    exit_code: int
    output: bytes
    timed_out: bool = False


class CliContainerRuntime:
    """Runs latexmk inside a distribution image via the docker CLI."""

    def __init__(self, binary: str = "docker") -> None:
        self.binary = binary

    def available(self) -> bool:
        return shutil.which(self.binary) is not None

    def run(self, image: str, tree: Path, workdir: str, argv: list[str], timeout_s: int) -> RunOutcome:
        cmd = [
            self.binary,
            "run",
            "--rm",
            "--network=none",
            "-v",
            f"{tree}:/work",
            "-w",
            workdir,
            image,
            *argv,
        ]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=timeout_s)
        except FileNotFoundError as exc:
            raise CompileEnvironmentError(f"container runtime missing: {self.binary}") from exc
        except subprocess.TimeoutExpired as exc:
            out = (exc.stdout or b"") + (exc.stderr or b"")
            return RunOutcome(exit_code=-1, output=out, timed_out=True)
        output = proc.stdout + proc.stderr
        if proc.returncode in (125, 126, 127) and any(
            m in output for m in _ENV_ERROR_MARKERS
        ):
            raise CompileEnvironmentError(output.decode("utf-8", "replace").strip()[:500])
        return RunOutcome(exit_code=proc.returncode, output=output)


# ------------------------------------------------------------- run_job


def _failure_stage(outcome: RunOutcome) -> str:
    if outcome.timed_out:
        return "timeout"
    if _BIBTEX_ERROR_RE.search(outcome.output):
        return "bibtex"
    return "latex"


def run_job(job: CompileJob, runtime, work_root: Path) -> CompileResult:
    """Execute one job in a private working copy of the source tree."""
    work_root.mkdir(parents=True, exist_ok=True)
    workdir = Path(
        tempfile.mkdtemp(prefix=f"{job.bundle_id}-", dir=work_root)
    )
    tree = workdir / "tree"
    shutil.copytree(job.root_dir, tree)
    entry_dir = job.entrypoint.parent
    container_cwd = "/work" if entry_dir == Path(".") else f"/work/{entry_dir.as_posix()}"
    log_path = workdir / "compile.log"

    start = time.monotonic()
    try:
        outcome = runtime.run(
            job.distribution.image_ref, tree, container_cwd, job.argv, job.timeout_s
        )
    except CompileEnvironmentError:
        raise
    except Exception as exc:  # runtime bug or IO error: a crashed job
        duration = int((time.monotonic() - start) * 1000)
        log_path.write_bytes(f"runtime crash: {exc}".encode("utf-8"))
        return CompileResult(job, "failure", "crash", duration, log_path, None, None)
    duration = int((time.monotonic() - start) * 1000)
    log_path.write_bytes(outcome.output)

    pdf_path = tree / entry_dir / (job.entrypoint.stem + ".pdf")
    pdf_exists = pdf_path.is_file()
    if outcome.exit_code == 0 and pdf_exists:
        try:
            pages = PdfDocument(pdf_path.read_bytes()).page_count
        except PdfParseError:
            return CompileResult(job, "failure", "crash", duration, log_path, pdf_path, None)
        if pages >= 1:
            return CompileResult(job, "success", None, duration, log_path, pdf_path, pages)
        return CompileResult(job, "failure", "crash", duration, log_path, pdf_path, None)
    stage = _failure_stage(outcome)
    return CompileResult(
        job, "failure", stage, duration, log_path, pdf_path if pdf_exists else None, None
    )


# ------------------------------------------------------ campaign store


def _result_to_json(result: CompileResult) -> dict:
    job = result.job
    return {
        "job": {
            "bundle_id": job.bundle_id,
            "root_dir": str(job.root_dir),
            "entrypoint": str(job.entrypoint),
            "engine": job.engine.name,
            "year": job.distribution.year,
            "image_ref": job.distribution.image_ref,
            "timeout_s": job.timeout_s,
            "extra_flags": list(job.extra_flags),
        },
        "status": result.status,
        "failure_stage": result.failure_stage,
        "duration_ms": result.duration_ms,
        "log_path": str(result.log_path),
        "pdf_path": str(result.pdf_path) if result.pdf_path else None,
        "page_count": result.page_count,
    }


def _result_from_json(data: dict) -> CompileResult:
    j = data["job"]
    job = CompileJob(
        bundle_id=j["bundle_id"],
        root_dir=Path(j["root_dir"]),
        entrypoint=Path(j["entrypoint"]),
        engine=Engine(j["engine"]),
        distribution=Distribution(j["year"], j["image_ref"]),
        timeout_s=j["timeout_s"],
        extra_flags=tuple(j["extra_flags"]),
    )
    return CompileResult(
        job=job,
        status=data["status"],
        failure_stage=data["failure_stage"],
        duration_ms=data["duration_ms"],
        log_path=Path(data["log_path"]),
        pdf_path=Path(data["pdf_path"]) if data["pdf_path"] else None,
        page_count=data["page_count"],
    )


class CampaignStore:
    """Append-only directory of one JSON record per finished job."""

    def __init__(self, root: Path) -> None:
        self.root = root
        root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def has(self, key: str) -> bool:
        return self._path(key).is_file()

    def load(self, key: str) -> CompileResult | None:
        """Read one record; a corrupt record is quarantined, not fatal."""
        path = self._path(key)
        if not path.is_file():
            return None
        try:
            return _result_from_json(json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            path.replace(path.with_suffix(".json.corrupt"))
            return None

    def write(self, key: str, result: CompileResult) -> bool:
        """Persist a record unless one already exists; returns whether written."""
        path = self._path(key)
        if path.exists():
            return False
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(_result_to_json(result), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        tmp.replace(path)
        return True

    def keys(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def load_all(self) -> list[CompileResult]:
        results = []
        for key in self.keys():
            result = self.load(key)
            if result is not None:
                results.append(result)
        return results


# ------------------------------------------------------- run_campaign


def run_campaign(
    jobs: list[CompileJob],
    store: CampaignStore,
    runtime,
    work_root: Path,
    parallelism: int = 1,
) -> list[CompileResult]:
    """Run all jobs not already in the store; return results in job order.

    Compile failures are recorded and never abort the campaign.  An
    environment failure (runtime or image unavailable) aborts only when
    no job could start at all; jobs hit by a mid-campaign environment
    failure are reported as crashed but left out of the store so a
    rerun retries them.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    if jobs and not runtime.available():
        raise CompileEnvironmentError("no container runtime available")

    tree_hashes: dict[Path, str] = {}
    keys = []
    for job in jobs:
        if job.root_dir not in tree_hashes:
            tree_hashes[job.root_dir] = bundle_tree_hash(job.root_dir)
        keys.append(job_key(job, tree_hashes[job.root_dir]))

    results: dict[str, CompileResult] = {}
    for key in keys:
        if key not in results:
            prior = store.load(key)
            if prior is not None:
                results[key] = prior

    pending = []
    queued: set[str] = set()
    for key, job in zip(keys, jobs):
        if key not in results and key not in queued:
            pending.append((key, job))
            queued.add(key)

    env_errors: dict[str, CompileEnvironmentError] = {}
    executor = ThreadPoolExecutor(max_workers=parallelism)
    try:
        futures = {
            executor.submit(run_job, job, runtime, work_root): key
            for key, job in pending
        }
        not_done = set(futures)
        while not_done:
            done, not_done = wait(not_done, return_when=FIRST_COMPLETED)
            # Checkpoint every finished job before letting an
            # interruption propagate, so resume skips all of them.
            interruptions = []
            for fut in done:
                key = futures[fut]
                exc = fut.exception()
                if exc is None:
                    result = fut.result()
                    store.write(key, result)
                    results[key] = result
                elif isinstance(exc, CompileEnvironmentError):
                    env_errors[key] = exc
                else:
                    interruptions.append(exc)
            if interruptions:
                raise interruptions[0]
    finally:
        executor.shutdown(wait=False, cancel_futures=True)

    if env_errors and not results:
        raise CompileEnvironmentError(str(next(iter(env_errors.values()))))
    for key, job in pending:
        if key in env_errors and key not in results:
            log = work_root / f"{key}.env-error.log"
            log.parent.mkdir(parents=True, exist_ok=True)
            log.write_text(str(env_errors[key]) + "\n", encoding="utf-8")
            results[key] = CompileResult(job, "failure", "crash", 0, log, None, None)
    return [results[key] for key in keys]
