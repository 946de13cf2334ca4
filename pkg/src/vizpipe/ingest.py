"""Loading tabular data and applying the data-spec selection/preprocessing.

Sources are locator strings resolved through a :class:`SourceResolver`:
local paths, ``http(s)://`` URLs (fetched once and cached on disk),
``upload:`` tokens registered by the service layer, and ``$chain`` for a
frame handed over from an upstream pipeline.

CSV dialect: comma delimiter, double-quote quoting with doubled-quote
escape, UTF-8, LF or CRLF line ends. The header row is mandatory. Empty
cells become nulls. Column types are inferred from a full scan: all-numeric
-> float64, integer-only -> int64, anything else -> categorical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np
import requests

from .errors import (
    EmptyInput,
    EncodeNonCategorical,
    NetworkError,
    ParseError,
    SizeLimitExceeded,
    UnknownColumn,
)
from .frame import (
    CATEGORICAL,
    Column,
    DataFrame,
    categorical_column,
    column_from_values,
    float_column,
    int_column,
)

DEFAULT_FETCH_CAP = 256 * 1024 * 1024  # bytes


def _infer_column(name: str, raw: list[str | None]) -> Column:
    """Full-scan type inference over string cells (None = empty cell)."""
    ints: list[int] = []
    floats: list[float] = []
    is_int = True
    is_num = True
    for cell in raw:
        if cell is None:
            continue
        text = cell.strip()
        if is_int:
            try:
                ints.append(int(text))
                continue
            except ValueError:
                is_int = False
        if is_num:
            try:
                floats.append(float(text))
            except ValueError:
                is_num = False
        if not is_num:
            break
    valid = [cell is not None for cell in raw]
    mask = None if all(valid) else valid
    if is_int:
        it = iter(ints)
        return int_column(name, [next(it) if ok else 0 for ok in valid], mask)
    if is_num:
        vals = []
        for cell in raw:
            vals.append(np.nan if cell is None else float(cell.strip()))
        return float_column(name, vals, mask)
    return categorical_column(name, raw)


def load_csv(text: str) -> DataFrame:
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("CSV has no header row") from None
    if not header or all(h.strip() == "" for h in header):
        raise EmptyInput("CSV header row is empty")
    rows = []
    for i, record in enumerate(reader):
        if len(record) != len(header):
            if not record:  # tolerate a trailing blank line
                continue
            raise ParseError(
                f"row {i + 2} has {len(record)} fields, header has {len(header)}", row=i + 2
            )
        rows.append(record)
    columns = []
    for j, name in enumerate(header):
        raw = [r[j] if r[j] != "" else None for r in rows]
        columns.append(_infer_column(name.strip(), raw))
    return DataFrame(columns, row_count=len(rows))


def load_json_records(text: str) -> DataFrame:
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(records, list):
        raise ParseError("JSON input must be a list of records")
    if not records:
        raise EmptyInput("JSON record list is empty")
    names: list[str] = []
    for rec in records:
        if not isinstance(rec, dict):
            raise ParseError("JSON records must be objects")
        for key in rec:
            if key not in names:
                names.append(key)
    cols = [column_from_values(n, [rec.get(n) for rec in records]) for n in names]
    return DataFrame(cols, row_count=len(records))


class FetchCache:
    """Disk cache for remote bodies, keyed by URL; stores the ETag seen."""

    def __init__(self, directory: str | Path | None = None, size_cap: int = DEFAULT_FETCH_CAP):
        base = directory or os.environ.get("P6_CACHE_DIR") or (Path.home() / ".cache" / "vizpipe")
        self.directory = Path(base)
        self.size_cap = size_cap
        self.hits = 0
        self.misses = 0

    def _paths(self, url: str) -> tuple[Path, Path]:
        digest = hashlib.sha256(url.encode()).hexdigest()[:24]
        return self.directory / f"{digest}.body", self.directory / f"{digest}.meta"

    def fetch(self, url: str) -> Path:
        """Return a local path for the URL's body, downloading on cache miss."""
        body_path, meta_path = self._paths(url)
        if body_path.exists():
            self.hits += 1
            return body_path
        self.misses += 1
        try:
            resp = requests.get(url, stream=True, timeout=60)
        except requests.RequestException as exc:
            raise NetworkError(0, f"fetch failed: {exc}") from None
        if resp.status_code != 200:
            raise NetworkError(resp.status_code)
        declared = resp.headers.get("Content-Length")
        if declared and int(declared) > self.size_cap:
            raise SizeLimitExceeded(f"{declared} bytes exceeds cap {self.size_cap}")
        chunks = []
        total = 0
        for chunk in resp.iter_content(65536):
            total += len(chunk)
            if total > self.size_cap:
                raise SizeLimitExceeded(f"body exceeds cap {self.size_cap}")
            chunks.append(chunk)
        self.directory.mkdir(parents=True, exist_ok=True)
        body_path.write_bytes(b"".join(chunks))
        meta_path.write_text(json.dumps({"url": url, "etag": resp.headers.get("ETag")}))
        return body_path


class SourceResolver:
    """Resolves data-spec source locators to frames."""

    def __init__(self, base_dir: str | Path | None = None, cache: FetchCache | None = None):
        self.base_dir = Path(base_dir) if base_dir else None
        self.cache = cache or FetchCache()
        self.uploads: dict[str, bytes] = {}
        self.chained: DataFrame | None = None

    def register_upload(self, token: str, body: bytes) -> None:
        self.uploads[token] = body

    def resolve(self, source: str) -> DataFrame:
        if source == "$chain":
            if self.chained is None:
                raise UnknownColumn("$chain source with no chained frame")
            return self.chained
        if source.startswith("upload:"):
            body = self.uploads.get(source)
            if body is None:
                raise FileNotFoundError(f"unknown upload token {source!r}")
            return _load_bytes(body, source)
        if source.startswith("http://") or source.startswith("https://"):
            path = self.cache.fetch(source)
            return _load_bytes(path.read_bytes(), source)
        path = Path(source)
        if self.base_dir and not path.is_absolute():
            path = self.base_dir / path
        return _load_bytes(path.read_bytes(), str(path))


def _load_bytes(body: bytes, name: str) -> DataFrame:
    if body[:4] == b"P6DF":
        from .codec import decode

        return decode(body)
    text = body.decode("utf-8-sig")
    fmt = "json-records" if name.rstrip().endswith(".json") else "csv"
    if fmt == "csv" and text.lstrip()[:1] in ("[", "{"):
        fmt = "json-records"
    return load_json_records(text) if fmt == "json-records" else load_csv(text)


def load_table(source: str, format: str | None = None, resolver: SourceResolver | None = None) -> DataFrame:
    """Load a CSV or JSON-records table through the given resolver."""
    resolver = resolver or SourceResolver()
    if format is None:
        return resolver.resolve(source)
    if source.startswith(("http://", "https://")):
        body = resolver.cache.fetch(source).read_bytes()
    elif source.startswith("upload:"):
        body = resolver.uploads[source]
    else:
        path = Path(source)
        if resolver.base_dir and not path.is_absolute():
            path = resolver.base_dir / path
        body = path.read_bytes()
    text = body.decode("utf-8-sig")
    return load_csv(text) if format == "csv" else load_json_records(text)


def fetch_remote(url: str, cache: FetchCache | None = None) -> str:
    """Fetch a remote body into the cache; the URL itself is the reusable token."""
    cache = cache or FetchCache()
    cache.fetch(url)
    return url


# --- selection / preprocessing ---------------------------------------------

def apply_selection(frame: DataFrame, selection: dict | None) -> DataFrame:
    if not selection:
        return frame
    columns = selection.get("columns")
    if columns:
        frame = frame.project(list(columns))
    sample_n = selection.get("sample_n")
    if sample_n is not None:
        frame = frame.sample_rows(int(sample_n), int(selection.get("seed", 0)))
    return frame


def drop_null_rows(frame: DataFrame, columns: list[str] | None = None) -> DataFrame:
    """Remove rows containing a null in any of the given columns (all by default)."""
    names = columns if columns is not None else frame.names
    keep = np.ones(frame.row_count, dtype=bool)
    for name in names:
        if name in frame:
            keep &= frame.column(name).valid_mask()
    if keep.all():
        return frame
    return frame.take(np.flatnonzero(keep))


def encode_numerical(frame: DataFrame, name: str) -> DataFrame:
    """Replace a categorical column with its dictionary codes as int64, in place."""
    col = frame.column(name)
    if col.dtype != CATEGORICAL:
        raise EncodeNonCategorical(f"column {name!r} is {col.dtype}")
    codes = Column("", "int64", col.values.astype(np.int64), col.valid).rename(name)
    cols = [codes if c.name == name else c for c in frame.columns]
    return DataFrame(cols, row_count=frame.row_count)


def encode_onehot(frame: DataFrame, name: str) -> DataFrame:
    """Replace a categorical column with one 0/1 column per dictionary value.

    Output columns are named ``<col>=<value>`` in dictionary (lexicographic)
    order; a null source cell yields all-zero indicators.
    """
    col = frame.column(name)
    if col.dtype != CATEGORICAL:
        raise EncodeNonCategorical(f"column {name!r} is {col.dtype}")
    valid = col.valid_mask()
    indicators = []
    for code, value in enumerate(col.dictionary):
        hit = ((col.values == code) & valid).astype(np.int64)
        indicators.append(Column(f"{name}={value}", "int64", hit))
    cols: list[Column] = []
    for c in frame.columns:
        if c.name == name:
            cols.extend(indicators)
        else:
            cols.append(c)
    return DataFrame(cols, row_count=frame.row_count)


def preprocess(frame: DataFrame, spec: dict | None, used_columns: list[str] | None = None) -> DataFrame:
    """Apply a preprocessing block: dropna then column encodings.

    ``dropna: true`` scans every column; ``dropna: "used"`` scans only
    `used_columns` (the fields referenced downstream).
    """
    if not spec:
        return frame
    dropna = spec.get("dropna")
    if dropna:
        frame = drop_null_rows(frame, used_columns if dropna == "used" else None)
    for name, how in (spec.get("encodings") or {}).items():
        if how == "numerical":
            frame = encode_numerical(frame, name)
        elif how == "onehot":
            frame = encode_onehot(frame, name)
        else:
            raise ValueError(f"unknown encoding {how!r} for column {name!r}")
    return frame
