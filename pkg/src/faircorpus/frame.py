"""Immutable column-typed tables and deterministic splitting.

Every cell carries a missing flag; values under a set flag are placeholders
and must never be read.  Tables are never mutated in place: each operation
returns a new ``Table``.

Random splits use numpy's ``Philox`` (a 64-bit counter-based generator) so
that a ``(seed, n_rows, test_fraction)`` triple yields the same partition on
every platform.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DTYPES = ("float", "int", "bool", "categorical", "text")
ROLES = ("feature", "sensitive", "target", "other")
NUMERIC_DTYPES = ("float", "int")
STRING_DTYPES = ("categorical", "text")

DEFAULT_NA_TOKENS = ("", "NA", "?")

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_BOOL_TRUE = {"1", "true"}
_BOOL_FALSE = {"0", "false"}


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Seeded generator used everywhere randomness is needed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    dtype: str
    values: np.ndarray
    missing: np.ndarray
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise ValueError(f"unknown dtype {self.dtype!r}")
        values = np.asarray(self.values)
        missing = np.asarray(self.missing, dtype=bool)
        if values.ndim != 1 or missing.shape != values.shape:
            raise ValueError(f"column {self.name!r}: values and missing mask must be 1-d and equal length")
        if self.dtype == "float":
            values = values.astype(np.float64)
        elif self.dtype == "int":
            values = values.astype(np.int64)
        elif self.dtype == "bool":
            values = values.astype(bool)
        else:
            values = np.array([str(v) for v in values], dtype=object)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))
        if self.dtype == "categorical":
            if self.categories is None:
                cats = tuple(sorted({str(v) for v in values[~missing]}))
            else:
                cats = tuple(self.categories)
                unknown = {str(v) for v in values[~missing]} - set(cats)
                if unknown:
                    raise ValueError(f"column {self.name!r}: values outside vocabulary: {sorted(unknown)[:5]}")
            object.__setattr__(self, "categories", cats)
        elif self.categories is not None:
            object.__setattr__(self, "categories", None)

    @classmethod
    def from_values(cls, name: str, values: Sequence, dtype: str, categories=None) -> Column:
        """Build a column from a python sequence where ``None`` marks missing."""
        missing = np.array([v is None for v in values], dtype=bool)
        fill = {"float": 0.0, "int": 0, "bool": False}.get(dtype, "")
        filled = [fill if v is None else v for v in values]
        return cls(name, dtype, np.array(filled, dtype=object), missing, categories)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_numeric(self) -> bool:
        return self.dtype in NUMERIC_DTYPES

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def to_list(self) -> list:
        """Python values with ``None`` for missing cells."""
        return [None if m else v.item() if isinstance(v, np.generic) else v for v, m in zip(self.values, self.missing)]

    def present(self) -> np.ndarray:
        return self.values[~self.missing]

    def format(self, i: int) -> str:
        if self.missing[i]:
            return ""
        return format_scalar(self.values[i], self.dtype)

    def formatted(self) -> list[str]:
        return [self.format(i) for i in range(len(self))]

    def rename(self, name: str) -> Column:
        return Column(name, self.dtype, self.values, self.missing, self.categories)

    def take(self, idx: np.ndarray) -> Column:
        return Column(self.name, self.dtype, self.values[idx], self.missing[idx], self.categories)

    def equals(self, other: Column) -> bool:
        if (self.name, self.dtype, self.categories) != (other.name, other.dtype, other.categories):
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        keep = ~self.missing
        return bool(np.array_equal(self.values[keep], other.values[keep]))


def format_scalar(value, dtype: str) -> str:
    """Canonical text form of a cell, shared by CSV export and value maps."""
    if dtype == "bool":
        return "1" if value else "0"
    if dtype == "int":
        return str(int(value))
    if dtype == "float":
        f = float(value)
        return str(int(f)) if f.is_integer() and abs(f) < 1e16 else repr(f)
    return str(value)


def infer_column(name: str, cells: Sequence[str], na_tokens: Iterable[str] = DEFAULT_NA_TOKENS) -> Column:
    """Type a column of raw strings as the narrowest consistent dtype.

    Candidates are tried in the order bool, int, float, categorical; string
    columns whose distinct count exceeds half their non-missing count are
    typed ``text``.  The outcome depends only on the multiset of cells, so
    row order never changes the inferred type.
    """
    na = {t.strip() for t in na_tokens}
    stripped = [c.strip() for c in cells]
    missing = np.array([c in na for c in stripped], dtype=bool)
    present = [c for c, m in zip(stripped, missing) if not m]
    n = len(stripped)

    lowered = {c.lower() for c in present}
    if lowered <= _BOOL_TRUE | _BOOL_FALSE:
        vals = np.array([c.lower() in _BOOL_TRUE if not m else False for c, m in zip(stripped, missing)], dtype=bool)
        return Column(name, "bool", vals, missing)
    if all(_INT_RE.match(c) for c in present):
        ints = [int(c) for c in present]
        if not ints or (min(ints) >= -(2**63) and max(ints) < 2**63):
            vals = np.zeros(n, dtype=np.int64)
            vals[~missing] = ints
            return Column(name, "int", vals, missing)
    if all(_FLOAT_RE.match(c) for c in present):
        vals = np.zeros(n, dtype=np.float64)
        vals[~missing] = [float(c) for c in present]
        return Column(name, "float", vals, missing)
    vals = np.array([c if not m else "" for c, m in zip(stripped, missing)], dtype=object)
    dtype = "categorical" if len(set(present)) <= len(present) / 2 else "text"
    return Column(name, dtype, vals, missing)


@dataclass(frozen=True, eq=False)
class Table:
    columns: tuple[Column, ...]
    roles: Mapping[str, str] = field(default_factory=dict)
    n_rows: int | None = None

    def __post_init__(self):
        cols = tuple(self.columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
        n_rows = lengths.pop() if lengths else (self.n_rows or 0)
        roles = {name: self.roles.get(name, "feature") for name in names}
        for name, role in self.roles.items():
            if name not in roles:
                raise ValueError(f"role assigned to unknown column {name!r}")
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r} for column {name!r}")
        if sum(r == "target" for r in roles.values()) > 1:
            raise ValueError("at most one column may have the target role")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "n_rows", n_rows)

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence], dtypes: Mapping[str, str], roles: Mapping[str, str] | None = None) -> Table:
        return cls(tuple(Column.from_values(k, v, dtypes[k]) for k, v in data.items()), roles or {})

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def __contains__(self, name: str) -> bool:
        return name in self.roles

    def __getitem__(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def names_with_role(self, role: str) -> list[str]:
        return [c.name for c in self.columns if self.roles[c.name] == role]

    @property
    def target_name(self) -> str | None:
        found = self.names_with_role("target")
        return found[0] if found else None

    @property
    def sensitive_names(self) -> list[str]:
        return self.names_with_role("sensitive")

    @property
    def feature_names(self) -> list[str]:
        return self.names_with_role("feature")

    def with_columns(self, columns: Iterable[Column], roles: Mapping[str, str] | None = None) -> Table:
        columns = tuple(columns)
        merged = {c.name: self.roles.get(c.name, "feature") for c in columns}
        merged.update(roles or {})
        return Table(columns, merged)

    def with_roles(self, roles: Mapping[str, str]) -> Table:
        return Table(self.columns, {**self.roles, **roles})

    def replace(self, column: Column, role: str | None = None) -> Table:
        cols = [column if c.name == column.name else c for c in self.columns]
        return self.with_columns(cols, {column.name: role} if role else None)

    def select(self, names: Sequence[str]) -> Table:
        wanted = set(names)
        return self.with_columns(c for c in self.columns if c.name in wanted)

    def drop(self, names: Iterable[str]) -> Table:
        unwanted = set(names)
        return self.with_columns(c for c in self.columns if c.name not in unwanted)

    def take(self, idx) -> Table:
        idx = np.asarray(idx, dtype=np.int64)
        return Table(tuple(c.take(idx) for c in self.columns), self.roles, n_rows=len(idx))

    def missing_matrix(self) -> np.ndarray:
        if not self.columns:
            return np.zeros((self.n_rows, 0), dtype=bool)
        return np.column_stack([c.missing for c in self.columns])

    def numeric_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack numeric/bool columns as float64; missing cells become NaN."""
        out = np.empty((self.n_rows, len(names)), dtype=np.float64)
        for j, name in enumerate(names):
            col = self[name]
            if col.dtype not in ("float", "int", "bool"):
                raise TypeError(f"column {name!r} is {col.dtype}, not numeric")
            out[:, j] = col.values.astype(np.float64)
            out[col.missing, j] = np.nan
        return out

    def equals(self, other: Table) -> bool:
        return (
            self.n_rows == other.n_rows
            and self.names == other.names
            and dict(self.roles) == dict(other.roles)
            and all(a.equals(b) for a, b in zip(self.columns, other.columns))
        )

    def to_csv(self) -> str:
        """UTF-8 CSV text with a header row; missing cells as empty fields."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        cols = [c.formatted() for c in self.columns]
        for i in range(self.n_rows):
            writer.writerow([col[i] for col in cols])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def split_indices(n_rows: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n_rows < 2:
        raise ValueError("need at least 2 rows to split")
    n_test = int(round(test_fraction * n_rows))
    if n_test == 0 or n_test == n_rows:
        raise ValueError(f"split of {n_rows} rows at fraction {test_fraction} leaves an empty part")
    perm = make_rng(seed).permutation(n_rows)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def train_test_split(table: Table, test_fraction: float = 0.3, seed: int = 80539) -> tuple[Table, Table]:
    """Uniform random row partition; each part keeps the original row order."""
    train_idx, test_idx = split_indices(table.n_rows, test_fraction, seed)
    return table.take(train_idx), table.take(test_idx)


def column_median(col: Column) -> float:
    if col.dtype not in ("float", "int"):
        raise TypeError(f"median needs a numeric column, {col.name!r} is {col.dtype}")
    vals = np.sort(col.present().astype(np.float64))
    if len(vals) == 0:
        raise ValueError(f"column {col.name!r} has no non-missing values")
    mid = len(vals) // 2
    if len(vals) % 2:
        return float(vals[mid])
    return float((vals[mid - 1] + vals[mid]) / 2)


def value_frequencies(col: Column) -> dict:
    """Counts of non-missing values, ordered by descending count then value."""
    counts: dict = {}
    for v in col.present():
        key = v.item() if isinstance(v, np.generic) else v
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
