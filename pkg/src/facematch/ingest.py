"""Corpus ingestion: manifest parsing, image fetching, embed + upsert.

The manifest replaces any site-specific scraping: one JSON object per line
with ``name`` and ``image_url`` fields (``id`` optional). Rows without a
usable url are recorded, not dropped, so every manifest row ends in exactly
one terminal status and the report always conserves the row count.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse
from urllib.request import url2pathname

import requests

from .errors import FaceMatchError
from .facepipe import (
    FacePipeline,
    ImageDecodeError,
    NoFaceDetected,
    crop_and_normalize,
    load_image,
    select_largest,
)
from .vecstore import VectorStore

MAX_IMAGE_BYTES = 20 * 1024 * 1024
FETCH_TIMEOUT_S = 30.0
FETCH_RETRIES = 1
DEFAULT_PARALLELISM = 4


class IngestError(FaceMatchError):
    code = "ingest_error"


class ManifestParseError(IngestError):
    code = "manifest_parse_error"


class FetchError(IngestError):
    code = "fetch_error"


class OversizeImage(IngestError):
    code = "oversize_image"


class StoreUnavailable(IngestError):
    code = "store_unavailable"


PENDING = "pending"
INGESTED = "ingested"
SKIPPED_NULL_URL = "skipped_null_url"
SKIPPED_FETCH_FAILED = "skipped_fetch_failed"
SKIPPED_NO_FACE = "skipped_no_face"
SKIPPED_DECODE_ERROR = "skipped_decode_error"

TERMINAL_STATUSES = (
    INGESTED,
    SKIPPED_NULL_URL,
    SKIPPED_FETCH_FAILED,
    SKIPPED_NO_FACE,
    SKIPPED_DECODE_ERROR,
)


@dataclass
class ProfileRecord:
    id: str
    name: str
    image_url: str
    status: str = PENDING


@dataclass
class IngestReport:
    total: int = 0
    counts: dict[str, int] = field(default_factory=dict)

    def add(self, status: str) -> None:
        self.total += 1
        self.counts[status] = self.counts.get(status, 0) + 1

    def get(self, status: str) -> int:
        return self.counts.get(status, 0)

    def to_dict(self) -> dict[str, int]:
        out = {"total": self.total}
        for status in TERMINAL_STATUSES:
            out[status] = self.get(status)
        return out

    def summary(self) -> str:
        parts = [f"total={self.total}"]
        parts += [f"{s}={self.get(s)}" for s in TERMINAL_STATUSES if self.get(s)]
        return "ingest report: " + " ".join(parts)


def _is_null_url(value) -> bool:
    if value is None:
        return True
    if not isinstance(value, str):
        return False
    return value.strip() == "" or value.strip().lower() == "null"


def parse_manifest(path: str | Path) -> list[ProfileRecord]:
    """Read a JSON-lines manifest into ProfileRecords.

    Rows whose image_url is missing, empty, or null are returned with
    status skipped_null_url; everything else starts pending. Malformed
    rows abort with the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"cannot read manifest {path}: {exc}") from exc
    records: list[ProfileRecord] = []
    row = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        row += 1
        try:
            doc = json.loads(line)
        except ValueError as exc:
            raise ManifestParseError(f"{path}:{lineno}: invalid record: {exc}") from exc
        if not isinstance(doc, dict):
            raise ManifestParseError(f"{path}:{lineno}: expected an object per line")
        name = doc.get("name")
        if not isinstance(name, str) or not name.strip():
            raise ManifestParseError(f"{path}:{lineno}: missing 'name' field")
        rec_id = doc.get("id")
        if rec_id is not None and (not isinstance(rec_id, str) or not rec_id.strip()):
            raise ManifestParseError(f"{path}:{lineno}: 'id' must be a non-empty string")
        url = doc.get("image_url")
        if _is_null_url(url):
            records.append(
                ProfileRecord(
                    id=rec_id or f"p{row:04d}",
                    name=name.strip(),
                    image_url="",
                    status=SKIPPED_NULL_URL,
                )
            )
            continue
        if not isinstance(url, str):
            raise ManifestParseError(f"{path}:{lineno}: 'image_url' must be a string")
        records.append(
            ProfileRecord(
                id=rec_id or f"p{row:04d}",
                name=name.strip(),
                image_url=url.strip(),
            )
        )
    return records


class ImageFetcher:
    """Fetches image bytes from http(s)://, file://, or plain paths."""

    def __init__(
        self,
        base_dir: str | Path | None = None,
        timeout: float = FETCH_TIMEOUT_S,
        retries: int = FETCH_RETRIES,
        max_bytes: int = MAX_IMAGE_BYTES,
        session: requests.Session | None = None,
    ):
        self.base_dir = Path(base_dir) if base_dir else None
        self.timeout = timeout
        self.retries = retries
        self.max_bytes = max_bytes
        self._session = session

    def fetch(self, url: str) -> bytes:
        scheme = urlparse(url).scheme
        if scheme in ("http", "https"):
            return self._fetch_http(url)
        if scheme == "file":
            return self._read_path(Path(url2pathname(urlparse(url).path)))
        # scheme-less: treat as a filesystem path relative to the manifest
        path = Path(url)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return self._read_path(path)

    def _read_path(self, path: Path) -> bytes:
        try:
            if path.stat().st_size > self.max_bytes:
                raise OversizeImage(f"{path} exceeds {self.max_bytes} bytes")
            return path.read_bytes()
        except OSError as exc:
            raise FetchError(f"cannot read {path}: {exc}") from exc

    def _fetch_http(self, url: str) -> bytes:
        http = self._session or requests
        last = "unreachable"
        for attempt in range(self.retries + 1):
            try:
                resp = http.get(url, timeout=self.timeout, stream=True)
                if resp.status_code != 200:
                    last = f"status {resp.status_code}"
                    continue
                data = b""
                for chunk in resp.iter_content(65536):
                    data += chunk
                    if len(data) > self.max_bytes:
                        raise OversizeImage(f"{url} exceeds {self.max_bytes} bytes")
                return data
            except OversizeImage:
                raise
            except requests.RequestException as exc:
                last = type(exc).__name__
        raise FetchError(f"cannot fetch {url}: {last}")


def ingest_all(
    records: list[ProfileRecord],
    store: VectorStore,
    pipeline: FacePipeline,
    fetcher: ImageFetcher,
    parallelism: int = DEFAULT_PARALLELISM,
) -> IngestReport:
    """Embed and upsert every pending record; per-record failures never abort.

    Fetch + embed run with bounded parallelism; upserts serialize through
    the store's writer lock. Statuses are written back onto the records and
    tallied into the returned report (aggregation is order-independent).
    """
    report_lock = threading.Lock()

    def process(record: ProfileRecord) -> None:
        try:
            data = fetcher.fetch(record.image_url)
        except OversizeImage:
            record.status = SKIPPED_DECODE_ERROR
            return
        except IngestError:
            record.status = SKIPPED_FETCH_FAILED
            return
        try:
            img = load_image(data)
            candidates = pipeline.detect_candidates(img)
            box = select_largest(candidates)
            tensor = crop_and_normalize(img, box)
            embedding = pipeline.embedder.embed(tensor)
        except ImageDecodeError:
            record.status = SKIPPED_DECODE_ERROR
            return
        except NoFaceDetected:
            record.status = SKIPPED_NO_FACE
            return
        try:
            store.upsert(
                record.id,
                embedding,
                {"name": record.name, "image_url": record.image_url},
            )
        except Exception as exc:
            raise StoreUnavailable(f"store rejected {record.id}: {exc}") from exc
        record.status = INGESTED

    pending = [r for r in records if r.status == PENDING]
    if pending:
        failures: list[BaseException] = []
        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            def guarded(record: ProfileRecord) -> None:
                try:
                    process(record)
                except BaseException as exc:  # store-level failure aborts the run
                    with report_lock:
                        failures.append(exc)
            list(pool.map(guarded, pending))
        if failures:
            raise failures[0]

    report = IngestReport()
    for record in records:
        report.add(record.status)
    return report
