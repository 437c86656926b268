"""Dataset preparation pipeline.

Stages run in a fixed order: feature scoping, missing-value handling, target
binarization, sensitive-attribute combination/grouping, categorical encoding
with a cardinality cap.  Every stage first *decides* (medians, modal values,
vocabularies) and then *applies* those decisions; the decisions are recorded
in a ``TransformReport`` so ``replay_transform`` can reproduce the output
without recomputing any statistic.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .errors import DegenerateTargetError, FairCorpusError, TransformError
from .frame import NUMERIC_DTYPES, STRING_DTYPES, Column, Table, column_median, format_scalar
from .manifest import DatasetAnnotation, Scenario

MISSING_PLACEHOLDER = "MISSING"
OTHER_CATEGORY = "OTHER"
MAJORITY, MINORITY = "majority", "minority"
INTERSECTION_SEP = "×"

FEATURE_SCOPES = ("essential", "all")
MISSING_MODES = ("drop_cols", "drop_rows", "impute")
TARGET_MODES = ("preferable", "majority_minority", "auto")
SENSITIVE_MODES = ("separate", "intersect")
GROUPINGS = ("as_is", "majority_minority")
ENCODINGS = ("onehot", "none")


@dataclass(frozen=True)
class TransformConfig:
    feature_scope: str = "essential"
    missing: str = "impute"
    target_mode: str = "auto"
    sensitive_mode: str = "separate"
    sensitive_grouping: str = "as_is"
    encoding: str = "onehot"
    max_cardinality: int = 200
    binarized_preset: bool = False

    def __post_init__(self):
        for name, allowed in [
            ("feature_scope", FEATURE_SCOPES),
            ("missing", MISSING_MODES),
            ("target_mode", TARGET_MODES),
            ("sensitive_mode", SENSITIVE_MODES),
            ("sensitive_grouping", GROUPINGS),
            ("encoding", ENCODINGS),
        ]:
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.max_cardinality < 1:
            raise ValueError("max_cardinality must be positive")
        if self.binarized_preset:
            object.__setattr__(self, "sensitive_mode", "intersect")
            object.__setattr__(self, "sensitive_grouping", "majority_minority")
            object.__setattr__(self, "encoding", "onehot")
            object.__setattr__(self, "missing", "impute")

    @classmethod
    def binarized(cls, **kwargs) -> TransformConfig:
        return cls(binarized_preset=True, **kwargs)


@dataclass
class TransformReport:
    config: dict[str, Any] = field(default_factory=dict)
    sensitive_selection: list[str] = field(default_factory=list)
    kept_columns: list[str] = field(default_factory=list)
    sensitive_columns_out: list[str] = field(default_factory=list)
    target_column_out: str = ""
    imputed_columns: dict[str, Any] = field(default_factory=dict)
    dropped_columns: list[str] = field(default_factory=list)
    dropped_row_count: int = 0
    category_maps: dict[str, dict[str, Any]] = field(default_factory=dict)
    target_value_map: dict[str, int] = field(default_factory=dict)
    sensitive_value_map: dict[str, dict[str, str]] = field(default_factory=dict)
    intersections: dict[str, list[str]] = field(default_factory=dict)
    degenerate_sensitive: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, ensure_ascii=False, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> TransformReport:
        raw = json.loads(text)
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in raw.items() if k in known})


def _str_values(col: Column) -> list[str]:
    return col.formatted()


def _frequencies(strings: list[str], missing: np.ndarray) -> list[tuple[str, int]]:
    counts: dict[str, int] = {}
    for s, m in zip(strings, missing):
        if not m:
            counts[s] = counts.get(s, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


# --- feature scoping ------------------------------------------------------

def scope_features(table: Table, annotation: DatasetAnnotation, scenario: Scenario, scope: str) -> list[str]:
    target = annotation.target_column
    if scope == "all":
        return table.names
    keep = set(annotation.feature_selector.resolve(table.names, target))
    keep |= set(annotation.sensitive_attributes) | {target}
    return [n for n in table.names if n in keep]


def _apply_scope(table: Table, kept: list[str], selection: list[str], target: str) -> Table:
    missing = [c for c in [target, *selection] if c not in table]
    if missing:
        raise TransformError(f"columns {missing} not present", "scope")
    roles = {n: "feature" for n in kept}
    roles.update({s: "sensitive" for s in selection})
    roles[target] = "target"
    return Table(tuple(table[n] for n in kept), roles)


# --- missing values -------------------------------------------------------

def _impute_column(col: Column, fill) -> Column:
    if not col.missing.any():
        return col
    if col.dtype in NUMERIC_DTYPES:
        values = col.values.astype(np.float64)
        values[col.missing] = fill
        dtype = col.dtype
        if dtype == "int" and float(fill).is_integer():
            values = values.astype(np.int64)
        else:
            dtype = "float"
        return Column(col.name, dtype, values, np.zeros(len(col), bool))
    strings = np.array(_str_values(col), dtype=object)
    strings[col.missing] = fill
    dtype = "text" if col.dtype == "text" else "categorical"
    return Column(col.name, dtype, strings, np.zeros(len(col), bool))


def _drop_missing_rows(table: Table) -> tuple[Table, int]:
    bad = table.missing_matrix().any(axis=1)
    if bad.all() and table.n_rows:
        raise TransformError("dropping rows with missing values leaves no rows", "missing")
    return table.take(np.flatnonzero(~bad)), int(bad.sum())


def handle_missing(table: Table, mode: str = "impute") -> tuple[Table, dict[str, Any]]:
    """Remove or fill missing cells; the returned table has none left."""
    if mode == "drop_cols":
        dropped = [c.name for c in table.columns if c.missing.any()]
        return table.drop(dropped), {"dropped_columns": dropped}
    if mode == "drop_rows":
        out, n = _drop_missing_rows(table)
        return out, {"dropped_row_count": n}
    if mode != "impute":
        raise ValueError(f"unknown missing mode {mode!r}")
    fills: dict[str, Any] = {}
    for col in table.columns:
        if not col.missing.any():
            continue
        if col.dtype in NUMERIC_DTYPES:
            if col.missing.all():
                raise TransformError(f"cannot impute all-missing numeric column {col.name!r}", "missing")
            fills[col.name] = column_median(col)
        else:
            fills[col.name] = MISSING_PLACEHOLDER
    return _apply_imputation(table, fills), {"imputed_columns": fills}


def _apply_imputation(table: Table, fills: dict[str, Any]) -> Table:
    return table.with_columns(_impute_column(c, fills[c.name]) if c.name in fills else c for c in table.columns)


# --- target ---------------------------------------------------------------

def canonical_literal(literal, dtype: str) -> str:
    """Text form a manifest literal takes in a column of the given dtype."""
    if dtype == "bool":
        low = str(literal).strip().lower()
        return {"true": "1", "false": "0", "1.0": "1", "0.0": "0"}.get(low, low)
    if dtype in NUMERIC_DTYPES:
        try:
            return format_scalar(float(literal), "float")
        except (TypeError, ValueError):
            return str(literal)
    return str(literal)


def binarize_target(table: Table, annotation: DatasetAnnotation, mode: str = "auto") -> tuple[Table, dict[str, Any]]:
    name = annotation.target_column
    if name not in table:
        raise TransformError(f"target column {name!r} not present", "target")
    col = table[name]
    freqs = _frequencies(_str_values(col), col.missing)
    if len(freqs) < 2:
        raise DegenerateTargetError(f"target column {name!r} has a single value", "target")
    good = annotation.target_lvl_good
    if mode == "auto":
        mode = "preferable" if good is not None else "majority_minority"
    if mode == "preferable":
        if good is None:
            raise TransformError(f"{annotation.dataset_id} has no annotated good target level", "target")
        positive = canonical_literal(good, col.dtype)
        if col.dtype == "bool" and positive not in ("0", "1"):
            positive = "1"
    else:
        positive = freqs[0][0]
    value_map = {v: int(v == positive) for v, _ in freqs}
    if not any(value_map.values()):
        raise DegenerateTargetError(f"good level {good!r} never occurs in {name!r}", "target")
    return _apply_target_map(table, name, value_map), {"target_value_map": value_map, "target_column_out": name}


def _apply_target_map(table: Table, name: str, value_map: dict[str, int]) -> Table:
    col = table[name]
    strings = _str_values(col)
    values = np.array([bool(value_map.get(s, 0)) for s in strings], dtype=bool)
    return table.replace(Column(name, "bool", values, col.missing), role="target")


# --- sensitive attributes -------------------------------------------------

def _intersect(table: Table, a: str, b: str) -> Column:
    ca, cb = table[a], table[b]
    sa, sb = _str_values(ca), _str_values(cb)
    vals = np.array([f"{x}{INTERSECTION_SEP}{y}" for x, y in zip(sa, sb)], dtype=object)
    return Column(f"{a}+{b}", "categorical", vals, ca.missing | cb.missing)


def _group_map(col: Column) -> dict[str, str]:
    freqs = _frequencies(_str_values(col), col.missing)
    return {v: (MAJORITY if i == 0 else MINORITY) for i, (v, _) in enumerate(freqs)}


def _apply_group_map(col: Column, mapping: dict[str, str]) -> Column:
    strings = _str_values(col)
    vals = np.array([mapping.get(s, MINORITY) if not m else "" for s, m in zip(strings, col.missing)], dtype=object)
    return Column(col.name, "categorical", vals, col.missing, categories=(MAJORITY, MINORITY))


def binarize_sensitive(
    table: Table, scenario: Scenario, mode: str = "separate", grouping: str = "as_is"
) -> tuple[Table, dict[str, Any]]:
    selection = list(scenario.sensitive_selection)
    absent = [s for s in selection if s not in table]
    if absent:
        raise TransformError(f"sensitive columns {absent} missing after earlier stages", "sensitive")
    intersections: dict[str, list[str]] = {}
    if mode == "intersect" and len(selection) == 2:
        intersections[f"{selection[0]}+{selection[1]}"] = selection
    table, outputs = _apply_intersections(table, selection, intersections)
    value_maps: dict[str, dict[str, str]] = {}
    degenerate = []
    if grouping == "majority_minority":
        for name in outputs:
            value_maps[name] = _group_map(table[name])
            if sum(1 for v in value_maps[name].values() if v == MINORITY) == 0:
                degenerate.append(name)
        table = _apply_value_maps(table, value_maps)
    return table, {
        "intersections": intersections,
        "sensitive_value_map": value_maps,
        "sensitive_columns_out": outputs,
        "degenerate_sensitive": degenerate,
    }


def _apply_intersections(table: Table, selection: list[str], intersections: dict[str, list[str]]):
    if not intersections:
        return table, selection
    (name, (a, b)), = intersections.items()
    combined = _intersect(table, a, b)
    table = table.with_columns([*table.columns, combined], {a: "other", b: "other", name: "sensitive"})
    return table, [name]


def _apply_value_maps(table: Table, value_maps: dict[str, dict[str, str]]) -> Table:
    cols = [_apply_group_map(c, value_maps[c.name]) if c.name in value_maps else c for c in table.columns]
    return table.with_columns(cols)


# --- encoding -------------------------------------------------------------

def encode_categoricals(table: Table, max_cardinality: int = 200, encoding: str = "onehot") -> tuple[Table, dict[str, Any]]:
    """Cap string-column cardinality, then expand to one indicator per value.

    Columns above the cap keep their ``max_cardinality - 1`` most frequent
    values; the rest become ``OTHER``.  Sensitive and target columns are
    never expanded.
    """
    maps: dict[str, dict[str, Any]] = {}
    for col in table.columns:
        if col.dtype not in STRING_DTYPES or table.roles[col.name] in ("sensitive", "target"):
            continue
        freqs = _frequencies(_str_values(col), col.missing)
        if len(freqs) > max_cardinality:
            retained = sorted(v for v, _ in freqs[: max_cardinality - 1])
            maps[col.name] = {"values": retained + [OTHER_CATEGORY], "other": True}
        else:
            maps[col.name] = {"values": sorted(v for v, _ in freqs), "other": False}
    return _apply_encoding(table, maps, encoding), {"category_maps": maps}


def _apply_encoding(table: Table, maps: dict[str, dict[str, Any]], encoding: str) -> Table:
    cols: list[Column] = []
    roles: dict[str, str] = {}
    for col in table.columns:
        role = table.roles[col.name]
        spec = maps.get(col.name)
        if spec is None:
            cols.append(col)
            roles[col.name] = role
            continue
        vocab = spec["values"]
        known = set(vocab)
        strings = np.array(
            [s if (s in known or not spec["other"]) else OTHER_CATEGORY for s in _str_values(col)], dtype=object
        )
        if encoding == "none":
            cols.append(Column(col.name, "categorical", strings, col.missing))
            roles[col.name] = role
            continue
        for value in vocab:
            name = f"{col.name}={value}"
            cols.append(Column(name, "bool", strings == value, col.missing))
            roles[name] = role
    return Table(tuple(cols), roles)


# --- pipeline -------------------------------------------------------------

def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except TransformError as exc:
        if exc.stage is None:
            raise type(exc)(str(exc), name) from exc
        raise
    except (FairCorpusError, ValueError, TypeError, KeyError) as exc:
        raise TransformError(str(exc), name) from exc


def transform_pipeline(
    table: Table, annotation: DatasetAnnotation, scenario: Scenario, config: TransformConfig | None = None
) -> tuple[Table, TransformReport]:
    config = config or TransformConfig()
    report = TransformReport(config=asdict(config), sensitive_selection=list(scenario.sensitive_selection))
    selection = list(scenario.sensitive_selection)

    kept = _stage("scope", scope_features, table, annotation, scenario, config.feature_scope)
    report.kept_columns = kept
    out = _stage("scope", _apply_scope, table, kept, selection, annotation.target_column)

    out, frag = _stage("missing", handle_missing, out, config.missing)
    _merge(report, frag)
    out, frag = _stage("target", binarize_target, out, annotation, config.target_mode)
    _merge(report, frag)
    out, frag = _stage(
        "sensitive", binarize_sensitive, out, scenario, config.sensitive_mode, config.sensitive_grouping
    )
    _merge(report, frag)
    out, frag = _stage("encoding", encode_categoricals, out, config.max_cardinality, config.encoding)
    _merge(report, frag)
    return out, report


def _merge(report: TransformReport, fragment: dict[str, Any]) -> None:
    for k, v in fragment.items():
        setattr(report, k, v)


def replay_transform(table: Table, report: TransformReport, target_column: str | None = None) -> Table:
    """Re-apply recorded decisions to ``table`` without recomputing statistics."""
    target = target_column or report.target_column_out
    selection = list(report.sensitive_selection)
    out = _apply_scope(table, report.kept_columns, selection, target)
    mode = report.config.get("missing", "impute")
    if mode == "drop_cols":
        out = out.drop(report.dropped_columns)
    elif mode == "drop_rows":
        out, _ = _drop_missing_rows(out)
    else:
        out = _apply_imputation(out, report.imputed_columns)
    out = _apply_target_map(out, target, report.target_value_map)
    out, _ = _apply_intersections(out, selection, report.intersections)
    out = _apply_value_maps(out, report.sensitive_value_map)
    return _apply_encoding(out, report.category_maps, report.config.get("encoding", "onehot"))
