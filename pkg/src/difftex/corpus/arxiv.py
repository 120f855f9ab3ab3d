"""Minimal arXiv API client: category listings and source downloads.

The export API wants literal ``+`` separators and bracketed date ranges
in the query string, so the URL is assembled by hand instead of letting
an HTTP library percent-encode it.  All requests go through one rate
limiter (one request per ``min_interval`` seconds, default 3) and a
bounded retry loop with exponential backoff for 5xx answers.
"""

from __future__ import annotations

import re
import threading
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import requests

from ..errors import ApiError, NetworkError, NotFound
from .model import ArxivId, TaxonomyQuery

QUERY_URL = "http://export.arxiv.org/api/query"
EPRINT_URL = "https://arxiv.org/e-print/{id}"
ATOM = "{http://www.w3.org/2005/Atom}"

NEW_STYLE_RE = re.compile(r"(\d{4}\.\d{4,5})")


class RateLimiter:
    """Serialises requests so consecutive ones are min_interval apart."""

    def __init__(self, min_interval: float, sleep=time.sleep) -> None:
        self.min_interval = min_interval
        self._sleep = sleep
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            due = self._last + self.min_interval
            if now < due:
                self._sleep(due - now)
                now = time.monotonic()
            self._last = now


class ArxivClient:
    """Issues rate-limited, retried requests against the arXiv endpoints.

    ``http_get`` may be replaced by tests; it must accept a URL and a
    timeout and return an object with ``status_code``, ``headers``, and
    ``content`` attributes.
    """

    def __init__(
        self,
        min_interval: float = 3.0,
        max_retries: int = 3,
        backoff: float = 2.0,
        timeout: float = 60.0,
        http_get=None,
        sleep=time.sleep,
    ) -> None:
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._sleep = sleep
        self._limiter = RateLimiter(min_interval, sleep=sleep)
        if http_get is None:
            session = requests.Session()
            session.headers["User-Agent"] = "difftex/0.1 (batch corpus fetch)"
            http_get = lambda url, timeout: session.get(url, timeout=timeout)
        self._http_get = http_get

    def _request(self, url: str) -> bytes:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            self._limiter.wait()
            try:
                resp = self._http_get(url, self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                self._sleep(self.backoff * (2**attempt))
                continue
            status = resp.status_code
            if status == 200:
                return resp.content
            if status in (403, 404):
                raise NotFound(f"{url} answered {status}")
            if status >= 500 or status == 429:
                retry_after = resp.headers.get("Retry-After")
                try:
                    delay = float(retry_after) if retry_after else 0.0
                except ValueError:
                    delay = 0.0
                self._sleep(max(delay, self.backoff * (2**attempt)))
                last_error = NetworkError(f"{url} answered {status}")
                continue
            raise ApiError(f"{url} answered unexpected status {status}")
        raise NetworkError(f"giving up on {url} after {self.max_retries + 1} tries") from last_error

    def query_taxonomy(self, query: TaxonomyQuery) -> list[ArxivId]:
        """Identifiers of papers submitted to a category in one month."""
        start, end = query.date_range
        url = (
            f"{QUERY_URL}?search_query=cat:{query.taxonomy}"
            f"+AND+submittedDate:[{start}+TO+{end}]"
            f"&max_results={query.limit}"
        )
        body = self._request(url)
        try:
            feed = ET.fromstring(body)
        except ET.ParseError as exc:
            raise ApiError(f"unparseable feed from {url}") from exc
        if feed.tag != ATOM + "feed":
            raise ApiError(f"expected an Atom feed from {url}, got {feed.tag}")
        ids: list[ArxivId] = []
        for entry in feed.findall(ATOM + "entry"):
            id_el = entry.find(ATOM + "id")
            if id_el is None or not id_el.text:
                continue
            m = NEW_STYLE_RE.search(id_el.text)
            if not m:
                continue  # old-scheme identifier, out of scope
            ids.append(ArxivId(m.group(1)))
            if len(ids) >= query.limit:
                break
        return ids

    def fetch_source(self, paper_id: ArxivId, cache_dir: Path) -> Path:
        """Download one paper's source blob, or reuse the cached copy.

        The cache is keyed by identifier; a cached blob short-circuits
        the network entirely.  Writes are atomic (temp file + rename).
        """
        cache_dir.mkdir(parents=True, exist_ok=True)
        blob = cache_dir / f"{paper_id.value}.blob"
        if blob.exists():
            return blob
        body = self._request(EPRINT_URL.format(id=paper_id.value))
        tmp = blob.with_suffix(".tmp")
        tmp.write_bytes(body)
        tmp.replace(blob)
        return blob


_default_client: ArxivClient | None = None
_default_lock = threading.Lock()


def _client() -> ArxivClient:
    global _default_client
    with _default_lock:
        if _default_client is None:
            _default_client = ArxivClient()
        return _default_client


def query_taxonomy(query: TaxonomyQuery) -> list[ArxivId]:
    return _client().query_taxonomy(query)


def fetch_source(paper_id: ArxivId, cache_dir: Path) -> Path:
    return _client().fetch_source(paper_id, cache_dir)
