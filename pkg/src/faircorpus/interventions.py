"""Debiasing interventions: rank-preserving feature repair (pre-processing) and
group-specific decision thresholds (post-processing)."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .frame import Column, Table
from .learn import average_ranks

THRESHOLD_GRID = np.round(np.arange(101) / 100.0, 2)
MAX_THRESHOLD_COMBINATIONS = 5_000_000
_TIE = 1e-12


def _quantile_function(sorted_values: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Linear interpolation between order statistics at probabilities ``q``."""
    n = len(sorted_values)
    if n == 1:
        return np.full(len(q), sorted_values[0])
    return np.interp(q * (n - 1), np.arange(n), sorted_values)


def _within_group_quantiles(values: np.ndarray) -> np.ndarray:
    n = len(values)
    if n == 1:
        return np.array([0.5])
    return (average_ranks(values) - 1.0) / (n - 1)


def repair_values(values: np.ndarray, group: np.ndarray, repair_level: float = 1.0) -> np.ndarray:
    """Move each value towards the median, across groups, of the groups'
    quantile functions evaluated at its own within-group quantile."""
    values = np.asarray(values, dtype=np.float64)
    labels = sorted(set(group.tolist()))
    sorted_by_group = {g: np.sort(values[group == g]) for g in labels}
    out = values.copy()
    for g in labels:
        mask = group == g
        q = _within_group_quantiles(values[mask])
        targets = np.median([_quantile_function(sorted_by_group[h], q) for h in labels], axis=0)
        out[mask] = (1.0 - repair_level) * values[mask] + repair_level * targets
    return out


def disparate_impact_repair(table: Table, sensitive_col: str, repair_level: float = 1.0) -> Table:
    """Repair every numeric feature column so its distribution no longer
    depends on the (binary) sensitive column.

    Bool indicator and string columns pass through untouched, as do missing
    cells.  ``repair_level`` 0 returns the input, 1 equalizes the per-group
    distributions; within-group rank order is kept for any level.
    """
    if not 0.0 <= repair_level <= 1.0:
        raise ValueError("repair_level must lie in [0, 1]")
    sens = table[sensitive_col]
    labels = set(sens.present().tolist())
    if len(labels) > 2:
        raise ValueError(f"sensitive column {sensitive_col!r} is not binary ({len(labels)} groups)")
    if repair_level == 0.0 or len(labels) < 2:
        return table
    group = np.array(sens.formatted(), dtype=object)
    cols = []
    for col in table.columns:
        if table.roles[col.name] != "feature" or not col.is_numeric:
            cols.append(col)
            continue
        rows = ~col.missing & ~sens.missing
        repaired = col.values.astype(np.float64)
        repaired[rows] = repair_values(repaired[rows], group[rows], repair_level)
        cols.append(Column(col.name, "float", repaired, col.missing))
    return table.with_columns(cols)


# --- group-specific thresholds --------------------------------------------

def _per_group_counts(scores, y, mask, grid):
    s, t = scores[mask], y[mask]
    predicted = s[None, :] >= grid[:, None]
    tp = (predicted & t[None, :]).sum(axis=1)
    fp = (predicted & ~t[None, :]).sum(axis=1)
    return tp, fp, int(t.sum()), int((~t).sum())


def _threshold_objectives(scores, group, y, grid):
    labels = sorted(set(group.tolist()))
    g_count = len(labels)
    if len(grid) ** g_count > MAX_THRESHOLD_COMBINATIONS:
        raise ValueError(f"{g_count} groups make the threshold grid too large")
    shape = [len(grid)] * g_count

    def along(axis, arr):
        view = [1] * g_count
        view[axis] = len(grid)
        return arr.astype(np.float64).reshape(view)

    tp_tot = np.zeros(shape)
    fp_tot = np.zeros(shape)
    P = N = 0
    tprs, sel_rates = [], []
    for k, g in enumerate(labels):
        tp, fp, p_g, n_g = _per_group_counts(scores, y, group == g, grid)
        tp_tot = tp_tot + along(k, tp)
        fp_tot = fp_tot + along(k, fp)
        P += p_g
        N += n_g
        sel_rates.append(along(k, (tp + fp) / (p_g + n_g)))
        if p_g:
            tprs.append(along(k, tp / p_g))

    terms = []
    if P:
        terms.append(tp_tot / P)
    if N:
        terms.append((N - fp_tot) / N)
    bacc = sum(terms) / len(terms)

    def spread(rates):
        if not rates:
            return np.zeros(shape)
        hi = np.broadcast_to(rates[0], shape).copy()
        lo = hi.copy()
        for r in rates[1:]:
            hi = np.maximum(hi, r)
            lo = np.minimum(lo, r)
        return hi - lo

    return labels, {"eod": spread(tprs), "dpd": spread(sel_rates)}, bacc


def fit_group_thresholds(scores, group, y, objective: str = "eod", grid=THRESHOLD_GRID) -> dict:
    """Exhaustive search over per-group thresholds on a 0.01 grid.

    Minimizes the chosen fairness gap (``"eod"`` or ``"dpd"``) on the given
    data; ties go to the higher balanced accuracy and then to the
    lexicographically smallest threshold vector (groups in sorted order).
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    group = np.asarray(group)
    if objective not in ("eod", "dpd"):
        raise ValueError(f"unknown objective {objective!r}")
    if len(scores) == 0 or not (len(scores) == len(y) == len(group)):
        raise ValueError("scores, group and y must be non-empty and of equal length")
    if not np.isfinite(scores).all():
        raise ValueError("scores contain non-finite values")
    labels, gaps, bacc = _threshold_objectives(scores, group, y, np.asarray(grid))
    gap = gaps[objective].ravel()
    bacc = bacc.ravel()
    candidates = gap <= gap.min() + _TIE
    best_bacc = bacc[candidates].max()
    winner = int(np.flatnonzero(candidates & (bacc >= best_bacc - _TIE))[0])
    index = np.unravel_index(winner, gaps[objective].shape)
    return {g: float(grid[i]) for g, i in zip(labels, index)}


def apply_group_thresholds(scores, group, thresholds: Mapping) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    group = np.asarray(group)
    unknown = set(group.tolist()) - set(thresholds)
    if unknown:
        raise ValueError(f"no threshold fitted for groups {sorted(unknown)}")
    cut = np.array([thresholds[g] for g in group.tolist()], dtype=np.float64)
    return scores >= cut

