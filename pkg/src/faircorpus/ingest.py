"""Acquire raw dataset bytes (with a local cache) and parse them into Tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

from filelock import FileLock

from .errors import FetchError, ManualDownloadRequired, ParseError, SchemaError, UnknownHookError
from .frame import DEFAULT_NA_TOKENS, Column, Table, infer_column
from .manifest import DatasetAnnotation

CACHE_ENV = "FAIRCORPUS_CACHE"
USER_AGENT = "faircorpus/0.1"


@dataclass(frozen=True)
class RawArtifact:
    data: bytes
    source_url: str
    fetched_at: str
    from_cache: bool


@dataclass(frozen=True)
class ParserConfig:
    format: str = "delimited"
    delimiter: str = ","
    has_header: bool = True
    colnames: tuple[str, ...] | None = None
    field_widths: tuple[int, ...] | None = None
    na_tokens: tuple[str, ...] = DEFAULT_NA_TOKENS

    def __post_init__(self):
        if self.format not in ("delimited", "fixed_width"):
            raise ValueError(f"unknown format {self.format!r}")
        if not self.has_header and not self.colnames:
            raise ValueError("colnames are required when the file has no header")
        if self.format == "fixed_width" and not self.field_widths:
            raise ValueError("field_widths are required for fixed-width files")
        if self.format == "delimited" and len(self.delimiter) != 1:
            raise ValueError("delimiter must be one character")

    @classmethod
    def for_annotation(cls, a: DatasetAnnotation) -> ParserConfig:
        return cls(
            format=a.format,
            delimiter=a.delimiter or ",",
            has_header=a.header,
            colnames=a.colnames,
            field_widths=a.field_widths,
            na_tokens=a.na_tokens if a.na_tokens is not None else DEFAULT_NA_TOKENS,
        )


# --- cache ----------------------------------------------------------------

def default_cache_dir() -> Path:
    if sys.platform == "darwin":
        base = Path.home() / "Library" / "Caches"
    elif os.name == "nt":
        base = Path(os.environ.get("LOCALAPPDATA", Path.home() / "AppData" / "Local"))
    else:
        base = Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache"))
    return base / "faircorpus"


def resolve_cache_dir(flag: str | os.PathLike | None = None) -> Path:
    """CLI flag, then $FAIRCORPUS_CACHE, then the platform cache home."""
    if flag:
        return Path(flag)
    if os.environ.get(CACHE_ENV):
        return Path(os.environ[CACHE_ENV])
    return default_cache_dir()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _download(url: str, timeout: float) -> bytes:
    if url.startswith("synthetic://"):
        from .synthetic import synthetic_bytes

        return synthetic_bytes(url)
    request = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
    try:
        with urllib.request.urlopen(request, timeout=timeout) as resp:
            status = getattr(resp, "status", 200) or 200
            if not 200 <= status < 300:
                raise FetchError(f"HTTP {status} for {url}")
            return resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"HTTP {exc.code} for {url}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"network failure for {url}: {exc}") from exc


def _extract_member(data: bytes, member: str, url: str) -> bytes:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            return zf.read(member)
    except KeyError:
        raise FetchError(f"archive from {url} has no member {member!r}") from None
    except zipfile.BadZipFile as exc:
        raise FetchError(f"{url} is not a ZIP archive: {exc}") from exc


def fetch(
    annotation: DatasetAnnotation,
    cache_dir: str | os.PathLike | None = None,
    timeout: float = 60.0,
    use_cache: bool = True,
) -> RawArtifact:
    """Return the dataset bytes, downloading only on a cache miss.

    ``cache_dir`` goes through ``resolve_cache_dir``; ``use_cache=False``
    always downloads and writes nothing.  The cache stores the raw download (the archive itself for zipped
    sources) under ``<cache>/<dataset_id>/<sha256(url)>.bin`` with a
    ``.meta`` JSON sidecar.  Fetches of one dataset are serialized through a
    lock file; writes go through a temporary file and an atomic rename.
    """
    if annotation.is_accessible != "public":
        raise ManualDownloadRequired(
            f"{annotation.dataset_id} is marked {annotation.is_accessible!r}; download it manually"
        )
    url = annotation.download_url
    if not url:
        raise FetchError(f"{annotation.dataset_id} has no download_url")

    if not use_cache:
        data = _download(url, timeout)
        _verify(annotation, data)
        fetched_at, from_cache = _now(), False
    else:
        folder = resolve_cache_dir(cache_dir) / annotation.dataset_id
        folder.mkdir(parents=True, exist_ok=True)
        key = hashlib.sha256(url.encode("utf-8")).hexdigest()
        blob, meta = folder / f"{key}.bin", folder / f"{key}.meta"
        with FileLock(str(folder / ".lock")):
            if blob.exists():
                data = blob.read_bytes()
                _verify(annotation, data)
                try:
                    fetched_at = json.loads(meta.read_text(encoding="utf-8"))["fetched_at"]
                except (OSError, ValueError, KeyError):
                    fetched_at = ""
                from_cache = True
            else:
                data = _download(url, timeout)
                _verify(annotation, data)
                fetched_at, from_cache = _now(), False
                _atomic_write(blob, data)
                sidecar = {"url": url, "fetched_at": fetched_at, "sha256": hashlib.sha256(data).hexdigest()}
                _atomic_write(meta, json.dumps(sidecar, indent=2).encode("utf-8"))

    if annotation.archive_member:
        data = _extract_member(data, annotation.archive_member, url)
    if not data:
        raise FetchError(f"empty download from {url}")
    return RawArtifact(data, url, fetched_at, from_cache)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _verify(annotation: DatasetAnnotation, data: bytes) -> None:
    if annotation.sha256 and hashlib.sha256(data).hexdigest() != annotation.sha256:
        raise FetchError(f"checksum mismatch for {annotation.dataset_id}")


# --- parsing --------------------------------------------------------------

def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _delimited_rows(text: str, config: ParserConfig) -> list[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=config.delimiter, skipinitialspace=True)
    rows = []
    try:
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            rows.append((reader.line_num, row))
    except csv.Error as exc:
        raise ParseError(str(exc), reader.line_num) from None
    return rows


def _fixed_width_rows(text: str, config: ParserConfig) -> list[tuple[int, list[str]]]:
    widths = config.field_widths
    starts = [sum(widths[:i]) for i in range(len(widths))]
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        # the final field may be cut short by trailing-whitespace trimming
        if len(line) <= starts[-1]:
            raise ParseError(f"line too short for {len(widths)} fixed-width fields", lineno)
        rows.append((lineno, [line[s : s + w] for s, w in zip(starts, widths)]))
    return rows


def parse_table(artifact: RawArtifact | bytes, config: ParserConfig) -> Table:
    """Parse delimited (RFC 4180 quoting) or fixed-width text into a Table."""
    data = artifact.data if isinstance(artifact, RawArtifact) else artifact
    text = _decode(data)
    rows = _delimited_rows(text, config) if config.format == "delimited" else _fixed_width_rows(text, config)

    if config.has_header:
        if not rows:
            raise ParseError("missing header row", 1)
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
        names = list(config.colnames) if config.colnames else header
        if len(names) != len(header):
            raise ParseError(f"header has {len(header)} fields but {len(names)} colnames were given", 1)
    else:
        names = list(config.colnames)

    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ParseError(f"duplicate column names {dupes}")
    for lineno, row in rows:
        if len(row) != len(names):
            raise ParseError(f"expected {len(names)} fields, found {len(row)}", lineno)

    cells = list(zip(*(row for _, row in rows))) if rows else [() for _ in names]
    columns = [infer_column(name, list(col), config.na_tokens) for name, col in zip(names, cells)]
    return Table(tuple(columns), n_rows=len(rows))


# --- processing hooks -----------------------------------------------------

Hook = Callable[[Table], Table]
HOOKS: dict[str, Hook] = {}


def register_hook(name: str, fn: Hook | None = None):
    """Register a pure table -> table hook; usable as a decorator."""
    def deco(f: Hook) -> Hook:
        HOOKS[name] = f
        return f

    return deco(fn) if fn is not None else deco


def make_rename_hook(mapping: Mapping[str, str]) -> Hook:
    def rename(table: Table) -> Table:
        roles = {mapping.get(k, k): v for k, v in table.roles.items()}
        return Table(tuple(c.rename(mapping.get(c.name, c.name)) for c in table.columns), roles)

    return rename


def apply_processing_hook(hook_id: str, table: Table) -> Table:
    try:
        hook = HOOKS[hook_id]
    except KeyError:
        raise UnknownHookError(f"unknown processing hook {hook_id!r}") from None
    return hook(table)


@register_hook("identity")
def _identity(table: Table) -> Table:
    return table


@register_hook("german_credit_sex")
def _german_credit_sex(table: Table) -> Table:
    """Derive a ``sex`` column from the combined personal-status code."""
    status = table["personal_status"]
    female = {"A92", "A95"}
    sex = Column.from_values(
        "sex",
        [None if v is None else ("female" if v in female else "male") for v in status.to_list()],
        "categorical",
    )
    return table.with_columns([*table.columns, sex])


def load_dataset(annotation: DatasetAnnotation, cache_dir=None) -> Table:
    """Fetch, parse and hook-process a dataset, tagging target and sensitive roles."""
    artifact = fetch(annotation, cache_dir)
    table = parse_table(artifact, ParserConfig.for_annotation(annotation))
    if annotation.processing_hook:
        table = apply_processing_hook(annotation.processing_hook, table)
    return tag_roles(table, annotation)


def tag_roles(table: Table, annotation: DatasetAnnotation, sensitive: Sequence[str] | None = None) -> Table:
    sensitive = list(annotation.sensitive_attributes if sensitive is None else sensitive)
    expected = [("target_column", annotation.target_column), *(("sensitive_attributes", s) for s in sensitive)]
    for key, col in expected:
        if col not in table:
            raise SchemaError(f"column {col!r} not found in data", key, annotation.dataset_id)
    roles = {name: "feature" for name in table.names}
    roles.update({s: "sensitive" for s in sensitive})
    roles[annotation.target_column] = "target"
    return table.with_roles(roles)
