"""Greedy construction of de-correlated scenario collections.

Scenarios are compared through the Spearman correlation of their delta-score
vectors.  The collection is seeded with the scenario whose mean correlation
to every other scenario is lowest; afterwards the candidate with the lowest
mean correlation to the current collection is admitted, and every scenario
sharing an exclusion key with it (always its dataset, optionally its
countries) leaves the pool.  Selection stops at ``k`` entries, or once the
best candidate's mean correlation is not strictly below ``tau``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import SelectionError
from .fairness import BASELINE, METRICS, DeltaRecord
from .learn import average_ranks

MIN_OVERLAP = 3
# assigned when a correlation cannot be estimated: such pairs never look diverse
CONSERVATIVE_CORRELATION = 1.0


def spearman(x, y) -> float | None:
    """Rank correlation over pairwise-complete entries (``None``/NaN = missing).

    Returns ``None`` with fewer than two complete pairs or when either side
    has constant ranks.
    """
    x = np.array([np.nan if v is None else v for v in x], dtype=np.float64)
    y = np.array([np.nan if v is None else v for v in y], dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("vectors differ in length")
    keep = ~(np.isnan(x) | np.isnan(y))
    if keep.sum() < 2:
        return None
    rx, ry = average_ranks(x[keep]), average_ranks(y[keep])
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt((dx @ dx) * (dy @ dy))
    if denom == 0:
        return None
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class DeltaMatrix:
    scenario_ids: tuple[str, ...]
    axis: tuple[tuple[str, int, str], ...]
    values: np.ndarray  # scenarios x axis, NaN for missing

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.scenario_ids), len(self.axis)):
            raise ValueError(f"values shape {values.shape} does not match ids/axis")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_records(
        cls, records: Iterable[DeltaRecord], method_order: Sequence[str] = (), include_baseline: bool = False
    ) -> DeltaMatrix:
        """Pivot delta records; non-ok records become missing entries.

        Axis order is (method, seed, metric), methods by ``method_order``
        first and then alphabetically, metrics in canonical order.
        """
        cells: dict[tuple, dict[str, float]] = defaultdict(dict)
        scenarios: list[str] = []
        for r in records:
            if r.method == BASELINE and not include_baseline:
                continue
            if r.scenario_id not in scenarios:
                scenarios.append(r.scenario_id)
            key = (r.method, r.seed, r.metric)
            if r.status == "ok" and r.delta is not None:
                cells[key][r.scenario_id] = r.delta
            else:
                cells.setdefault(key, {})
        rank = {m: i for i, m in enumerate(method_order)}
        metric_rank = {m: i for i, m in enumerate(METRICS)}
        axis = sorted(
            cells,
            key=lambda k: (rank.get(k[0], len(rank)), k[0], k[1], metric_rank.get(k[2], len(metric_rank)), k[2]),
        )
        scenarios.sort()
        values = np.full((len(scenarios), len(axis)), np.nan)
        for j, key in enumerate(axis):
            for i, sid in enumerate(scenarios):
                if sid in cells[key]:
                    values[i, j] = cells[key][sid]
        return cls(tuple(scenarios), tuple(axis), values)


def correlation_matrix(deltas: DeltaMatrix) -> np.ndarray:
    n = len(deltas.scenario_ids)
    corr = np.eye(n)
    complete = ~np.isnan(deltas.values)
    for a in range(n):
        for b in range(a + 1, n):
            overlap = int((complete[a] & complete[b]).sum())
            r = spearman(deltas.values[a], deltas.values[b]) if overlap >= MIN_OVERLAP else None
            corr[a, b] = corr[b, a] = CONSERVATIVE_CORRELATION if r is None else r
    return corr


@dataclass(frozen=True)
class SelectionConstraints:
    k: int | None = None
    tau: float | None = None
    group_keys: tuple[str, ...] = ("dataset",)
    predicate: Callable[[str], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.k is None and self.tau is None:
            raise ValueError("need at least one of k and tau")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")
        keys = tuple(dict.fromkeys(("dataset", *self.group_keys)))
        unknown = set(keys) - {"dataset", "country"}
        if unknown:
            raise ValueError(f"unknown exclusion keys {sorted(unknown)}")
        object.__setattr__(self, "group_keys", keys)

    def to_json(self) -> dict:
        return {"k": self.k, "tau": self.tau, "group_keys": list(self.group_keys)}


@dataclass(frozen=True)
class CollectionEntry:
    scenario_id: str
    dataset_id: str
    avg_correlation_at_insertion: float


@dataclass(frozen=True)
class Collection:
    entries: tuple[CollectionEntry, ...]
    constraints_used: SelectionConstraints

    @property
    def scenario_ids(self) -> list[str]:
        return [e.scenario_id for e in self.entries]

    def to_json(self) -> str:
        doc = {
            "constraints": self.constraints_used.to_json(),
            "entries": [
                {
                    "scenario_id": e.scenario_id,
                    "dataset_id": e.dataset_id,
                    "avg_correlation_at_insertion": e.avg_correlation_at_insertion,
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def dataset_of(scenario_id: str) -> str:
    return scenario_id.split("::", 1)[0]


def _exclusion_keys(scenario_id: str, meta: Mapping[str, Mapping], group_keys: Sequence[str]) -> set:
    keys = {("dataset", meta.get(scenario_id, {}).get("dataset_id", dataset_of(scenario_id)))}
    if "country" in group_keys:
        # scenarios without a country (synthetic, "n/a") never clash on country
        keys |= {("country", c) for c in meta.get(scenario_id, {}).get("countries", ())}
    return keys


def greedy_select(
    corr: np.ndarray,
    scenario_ids: Sequence[str],
    constraints: SelectionConstraints,
    meta: Mapping[str, Mapping] | None = None,
) -> Collection:
    """Run the greedy selection on a precomputed correlation matrix."""
    meta = meta or {}
    ids = list(scenario_ids)
    corr = np.asarray(corr, dtype=np.float64)
    if corr.shape != (len(ids), len(ids)):
        raise ValueError("correlation matrix does not match scenario ids")
    pool = [i for i, sid in enumerate(ids) if constraints.predicate is None or constraints.predicate(sid)]
    if not pool:
        raise SelectionError("no scenarios left after filtering")
    keys = {i: _exclusion_keys(ids[i], meta, constraints.group_keys) for i in pool}

    def argmin(stats: dict[int, float]) -> int:
        return min(stats, key=lambda i: (stats[i], ids[i]))

    m = len(pool)
    seed_stats = {i: (sum(corr[i, j] for j in pool if j != i) / (m - 1) if m > 1 else 0.0) for i in pool}
    first = argmin(seed_stats)
    chosen = [first]
    entries = [CollectionEntry(ids[first], dataset_of(ids[first]), float(seed_stats[first]))]
    remaining = [i for i in pool if i != first and not (keys[i] & keys[first])]

    while remaining and (constraints.k is None or len(chosen) < constraints.k):
        stats = {j: sum(corr[i, j] for i in chosen) / len(chosen) for j in remaining}
        best = argmin(stats)
        if constraints.tau is not None and not stats[best] < constraints.tau:
            break
        chosen.append(best)
        entries.append(CollectionEntry(ids[best], dataset_of(ids[best]), float(stats[best])))
        remaining = [j for j in remaining if j != best and not (keys[j] & keys[best])]
    return Collection(tuple(entries), constraints)


def select_collection(
    deltas: DeltaMatrix, meta: Mapping[str, Mapping] | None = None, constraints: SelectionConstraints | None = None
) -> Collection:
    """Correlate delta vectors pairwise, then select greedily.

    ``meta`` maps scenario id to attributes: ``dataset_id`` (defaults to the
    id prefix) and ``countries`` (used with the ``country`` exclusion key).
    """
    if constraints is None:
        raise ValueError("constraints are required")
    if len(deltas.scenario_ids) == 0:
        raise SelectionError("delta matrix holds no scenarios")
    def constant(row):
        present = row[~np.isnan(row)]
        return len(present) == 0 or present.min() == present.max()

    if len(deltas.scenario_ids) > 1 and all(constant(row) for row in deltas.values):
        raise SelectionError("every delta vector is constant; correlations are undefined")
    return greedy_select(correlation_matrix(deltas), deltas.scenario_ids, constraints, meta)
