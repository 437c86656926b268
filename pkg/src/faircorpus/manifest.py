"""Corpus registry: parse, validate, serialize and query dataset annotations.

A manifest is a UTF-8 JSON document::

    {"schema_version": "1", "datasets": [{...annotation...}, ...]}

Annotation keys are the snake_case field names of ``DatasetAnnotation``.
``feature_selector`` is one of ``"all"`` (every column except the target),
``{"include": [...]}`` or ``{"exclude": [...]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping

from .errors import (
    DuplicateIdError,
    ManifestSyntaxError,
    NoSensitiveAttributesError,
    SchemaError,
)

SCHEMA_VERSION = "1"
ACCESS_LEVELS = ("public", "manual", "restricted")
FORMATS = ("delimited", "fixed_width")
# free-text annotation fields that are carried along but never interpreted
PASSTHROUGH_KEYS = frozenset(
    {
        "description_public",
        "notes_public",
        "affiliation",
        "years_data",
        "citation",
        "dataset_aliases",
        "main_url",
        "related_urls",
        "continent",
        "year_last_updated",
        "dataset_variant_description",
    }
)
MAX_PAIR_ATTRIBUTES = 3  # pairwise intersections only below four attributes

_ISO3 = re.compile(r"^[A-Z]{3}$")
_SHA256 = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class FeatureSelector:
    mode: str  # "all" | "include" | "exclude"
    columns: tuple[str, ...] = ()

    def resolve(self, available: Iterable[str], target: str) -> list[str]:
        available = list(available)
        if self.mode == "include":
            return [c for c in available if c in set(self.columns)]
        excluded = set(self.columns) | {target}
        return [c for c in available if c not in excluded]

    def to_json(self):
        return "all" if self.mode == "all" else {self.mode: list(self.columns)}


@dataclass(frozen=True)
class DatasetAnnotation:
    dataset_id: str
    dataset_name: str
    is_accessible: str
    format: str
    sensitive_attributes: tuple[str, ...]
    sensitive_categories: dict[str, tuple[str, ...]]
    feature_selector: FeatureSelector
    target_column: str
    license_permissive: bool
    country: tuple[str, ...] | str
    domain: str
    base_dataset_name: str | None = None
    variant_id: str | None = None
    download_url: str | None = None
    delimiter: str | None = None
    colnames: tuple[str, ...] | None = None
    has_header: bool | None = None
    field_widths: tuple[int, ...] | None = None
    na_tokens: tuple[str, ...] | None = None
    archive_member: str | None = None
    processing_hook: str | None = None
    target_lvl_good: Any = None
    target_lvl_bad: Any = None
    license: str | None = None
    sample_size_hint: int | None = None
    sha256: str | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def countries(self) -> tuple[str, ...]:
        return () if self.country == "n/a" else tuple(self.country)

    @property
    def header(self) -> bool:
        if self.has_header is not None:
            return self.has_header
        return self.colnames is None


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    dataset_id: str
    sensitive_selection: tuple[str, ...]


@dataclass(frozen=True)
class CorpusRegistry:
    annotations: tuple[DatasetAnnotation, ...]
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        seen = set()
        for a in self.annotations:
            if a.dataset_id in seen:
                raise DuplicateIdError(f"duplicate dataset_id {a.dataset_id!r}")
            seen.add(a.dataset_id)
        object.__setattr__(self, "annotations", tuple(self.annotations))

    def __iter__(self) -> Iterator[DatasetAnnotation]:
        return iter(self.annotations)

    def __len__(self) -> int:
        return len(self.annotations)

    @property
    def ids(self) -> list[str]:
        return [a.dataset_id for a in self.annotations]

    def get(self, dataset_id: str) -> DatasetAnnotation:
        for a in self.annotations:
            if a.dataset_id == dataset_id:
                return a
        raise KeyError(f"unknown dataset_id {dataset_id!r}")

    def scenarios(self) -> list[Scenario]:
        return [s for a in self.annotations for s in enumerate_scenarios(a)]

    def find_scenario(self, scenario_id: str) -> Scenario:
        dataset_id = scenario_id.split("::", 1)[0]
        for s in enumerate_scenarios(self.get(dataset_id)):
            if s.scenario_id == scenario_id:
                return s
        raise KeyError(f"unknown scenario_id {scenario_id!r}")


# --- validation -----------------------------------------------------------

def _str(raw: Mapping, key: str, ds: str | None, required: bool = False) -> str | None:
    value = raw.get(key)
    if value is None:
        if required:
            raise SchemaError("missing required field", key, ds)
        return None
    if not isinstance(value, str) or (required and not value):
        raise SchemaError("expected a non-empty string", key, ds)
    return value


def _str_list(raw: Mapping, key: str, ds: str | None, required: bool = False) -> tuple[str, ...] | None:
    value = raw.get(key)
    if value is None:
        if required:
            raise SchemaError("missing required field", key, ds)
        return None
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError("expected a list of strings", key, ds)
    return tuple(value)


def _literal(raw: Mapping, key: str, ds: str | None):
    value = raw.get(key)
    if value is not None and not isinstance(value, (str, int, float, bool)):
        raise SchemaError("expected a scalar literal", key, ds)
    return value


def _feature_selector(value, ds) -> FeatureSelector:
    if value == "all":
        return FeatureSelector("all")
    if isinstance(value, dict) and len(value) == 1:
        (mode, cols), = value.items()
        if mode in ("include", "exclude") and isinstance(cols, list) and all(isinstance(c, str) for c in cols):
            return FeatureSelector(mode, tuple(cols))
    raise SchemaError('expected "all", {"include": [...]} or {"exclude": [...]}', "feature_selector", ds)


def _annotation_from_json(raw: Any, strict: bool) -> DatasetAnnotation:
    if not isinstance(raw, dict):
        raise SchemaError("annotation must be a JSON object")
    ds = raw.get("dataset_id") if isinstance(raw.get("dataset_id"), str) else None
    known = {f.name for f in fields(DatasetAnnotation)} - {"extras"}
    unknown = set(raw) - known - PASSTHROUGH_KEYS
    if unknown and strict:
        raise SchemaError(f"unknown keys {sorted(unknown)}", sorted(unknown)[0], ds)
    ds = _str(raw, "dataset_id", ds, required=True)

    is_accessible = _str(raw, "is_accessible", ds, required=True)
    if is_accessible not in ACCESS_LEVELS:
        raise SchemaError(f"must be one of {ACCESS_LEVELS}", "is_accessible", ds)
    fmt = _str(raw, "format", ds, required=True)
    if fmt not in FORMATS:
        raise SchemaError(f"must be one of {FORMATS}", "format", ds)
    delimiter = _str(raw, "delimiter", ds)
    if delimiter is not None and len(delimiter) != 1:
        raise SchemaError("delimiter must be a single character", "delimiter", ds)

    sensitive = _str_list(raw, "sensitive_attributes", ds, required=True)
    cats_raw = raw.get("sensitive_categories")
    if not isinstance(cats_raw, dict):
        raise SchemaError("expected an object mapping column to category labels", "sensitive_categories", ds)
    cats = {}
    for k, v in cats_raw.items():
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise SchemaError(f"categories of {k!r} must be a list of strings", "sensitive_categories", ds)
        cats[k] = tuple(v)
    for attr in sensitive:
        if attr not in cats:
            raise SchemaError(f"sensitive attribute {attr!r} has no categories entry", "sensitive_categories", ds)

    target = _str(raw, "target_column", ds, required=True)
    if "feature_selector" not in raw:
        raise SchemaError("missing required field", "feature_selector", ds)
    selector = _feature_selector(raw["feature_selector"], ds)
    if selector.mode == "include" and target in selector.columns:
        raise SchemaError("positive feature list includes the target column", "feature_selector", ds)

    good = _literal(raw, "target_lvl_good", ds)
    bad = _literal(raw, "target_lvl_bad", ds)
    if good is not None and bad is not None and str(good) == str(bad):
        raise SchemaError("target_lvl_good equals target_lvl_bad", "target_lvl_good", ds)

    permissive = raw.get("license_permissive")
    if not isinstance(permissive, bool):
        raise SchemaError("expected a boolean", "license_permissive", ds)

    country = raw.get("country")
    if country != "n/a":
        if not isinstance(country, list) or not all(isinstance(c, str) and _ISO3.match(c) for c in country):
            raise SchemaError('expected a list of ISO3 codes or "n/a"', "country", ds)
        country = tuple(country)

    colnames = _str_list(raw, "colnames", ds)
    has_header = raw.get("has_header")
    if has_header is not None and not isinstance(has_header, bool):
        raise SchemaError("expected a boolean", "has_header", ds)
    header = has_header if has_header is not None else colnames is None
    if not header and colnames is None:
        raise SchemaError("colnames required for a headerless file", "colnames", ds)

    widths = raw.get("field_widths")
    if widths is not None:
        if not isinstance(widths, list) or not widths or not all(
            isinstance(w, int) and not isinstance(w, bool) and w > 0 for w in widths
        ):
            raise SchemaError("expected a list of positive integers", "field_widths", ds)
        widths = tuple(widths)
    if fmt == "fixed_width" and widths is None:
        raise SchemaError("fixed_width format requires field_widths", "field_widths", ds)

    url = _str(raw, "download_url", ds)
    if url is not None and "://" not in url:
        raise SchemaError("download_url must be an absolute URL", "download_url", ds)
    size = raw.get("sample_size_hint")
    if size is not None and (not isinstance(size, int) or isinstance(size, bool) or size < 0):
        raise SchemaError("expected a non-negative integer", "sample_size_hint", ds)
    sha = _str(raw, "sha256", ds)
    if sha is not None and not _SHA256.match(sha):
        raise SchemaError("expected 64 lowercase hex digits", "sha256", ds)

    return DatasetAnnotation(
        dataset_id=ds,
        dataset_name=_str(raw, "dataset_name", ds, required=True),
        is_accessible=is_accessible,
        format=fmt,
        sensitive_attributes=sensitive,
        sensitive_categories=cats,
        feature_selector=selector,
        target_column=target,
        license_permissive=permissive,
        country=country,
        domain=_str(raw, "domain", ds, required=True),
        base_dataset_name=_str(raw, "base_dataset_name", ds),
        variant_id=_str(raw, "variant_id", ds),
        download_url=url,
        delimiter=delimiter,
        colnames=colnames,
        has_header=has_header,
        field_widths=widths,
        na_tokens=_str_list(raw, "na_tokens", ds),
        archive_member=_str(raw, "archive_member", ds),
        processing_hook=_str(raw, "processing_hook", ds),
        target_lvl_good=good,
        target_lvl_bad=bad,
        license=_str(raw, "license", ds),
        sample_size_hint=size,
        sha256=sha,
        extras={k: raw[k] for k in raw if k not in known},
    )


def parse_manifest(text: str | bytes, strict: bool = True) -> CorpusRegistry:
    """Parse and validate manifest text.

    With ``strict=False`` unknown annotation keys are kept in ``extras``
    (and written back by ``serialize_manifest``) instead of rejected.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("datasets"), list):
        raise SchemaError('top level must be {"schema_version": ..., "datasets": [...]}', "datasets")
    version = doc.get("schema_version")
    if not isinstance(version, str):
        raise SchemaError("expected a string", "schema_version")
    return CorpusRegistry(tuple(_annotation_from_json(a, strict) for a in doc["datasets"]), version)


def annotation_to_json(a: DatasetAnnotation) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in fields(DatasetAnnotation):
        if f.name == "extras":
            continue
        value = getattr(a, f.name)
        if value is None:
            continue
        if f.name == "feature_selector":
            value = value.to_json()
        elif f.name == "sensitive_categories":
            value = {k: list(v) for k, v in value.items()}
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    out.update(a.extras)
    return out


def serialize_manifest(registry: CorpusRegistry) -> str:
    doc = {"schema_version": registry.schema_version, "datasets": [annotation_to_json(a) for a in registry]}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_registry(path: str | Path | None = None, strict: bool = True) -> CorpusRegistry:
    """Load a manifest file; without a path, the packaged fixture corpus."""
    if path is None:
        text = resources.files("faircorpus").joinpath("data/manifest.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_manifest(text, strict=strict)


# --- scenarios ------------------------------------------------------------

def scenario_id_for(dataset_id: str, selection: Iterable[str]) -> str:
    return f"{dataset_id}::{'+'.join(selection)}"


def enumerate_scenarios(annotation: DatasetAnnotation) -> list[Scenario]:
    """Singletons in manifest order, then pairs when there are fewer than four attributes."""
    attrs = annotation.sensitive_attributes
    if not attrs:
        raise NoSensitiveAttributesError(f"{annotation.dataset_id} has no sensitive attributes")
    selections = [(a,) for a in attrs]
    if len(attrs) <= MAX_PAIR_ATTRIBUTES:
        selections += list(combinations(attrs, 2))
    return [Scenario(scenario_id_for(annotation.dataset_id, sel), annotation.dataset_id, sel) for sel in selections]


# --- filtering ------------------------------------------------------------

Predicate = Callable[[DatasetAnnotation], bool]


def filter_registry(registry: CorpusRegistry, predicate: Predicate) -> CorpusRegistry:
    return CorpusRegistry(tuple(a for a in registry if predicate(a)), registry.schema_version)


def permissive_license(a: DatasetAnnotation) -> bool:
    return bool(a.license) and a.license.strip() != "?" and a.license_permissive


def has_country(a: DatasetAnnotation) -> bool:
    return bool(a.countries)


def country_in(codes: Iterable[str]) -> Predicate:
    wanted = set(codes)
    return lambda a: bool(wanted & set(a.countries))


PREDICATES: dict[str, Predicate] = {
    "permissive": permissive_license,
    "has-country": has_country,
}
