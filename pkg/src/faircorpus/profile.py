"""Computed dataset metadata, before and after transformation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientSupportError
from .frame import Table, make_rng
from .learn import fit_random_forest, rf_predict_proba, roc_auc
from .manifest import DatasetAnnotation, Scenario
from .transform import MAJORITY, MINORITY

HOLDOUT_FRACTION = 0.3


@dataclass
class MetaProfile:
    meta_pretrans_n_rows: int = 0
    meta_pretrans_n_cols: int = 0
    meta_n_rows: int = 0
    meta_n_cols: int = 0
    meta_pretrans_prop_NA_rows: float = 0.0
    meta_pretrans_prop_NA_cols: float = 0.0
    meta_pretrans_prop_NA_cells: float = 0.0
    meta_prop_NA_sens_minority: float | None = None
    meta_prop_NA_sens_majority: float | None = None
    meta_prop_cols_float: float = 0.0
    meta_prop_cols_int: float = 0.0
    meta_prop_cols_bool: float = 0.0
    meta_sens_predictability_roc_auc: float | None = None
    meta_average_absolute_correlation: float | None = None
    meta_maximum_absolute_correlation: float | None = None
    meta_pretrans_unique_group_counts_pre_agg: list[int] = field(default_factory=list)
    meta_prev_sens_minority: float | None = None
    meta_prev_sens_majority: float | None = None
    meta_prev_sens_difference: float | None = None
    meta_prev_sens_ratio: float | None = None
    meta_prev_sens_gini: float | None = None
    meta_base_rate_target: float | None = None
    meta_base_rate_target_sens_minority: float | None = None
    meta_base_rate_target_sens_majority: float | None = None
    meta_base_rate_difference: float | None = None
    meta_base_rate_ratio: float | None = None
    meta_base_rate_sens_gini: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def gini_simpson(proportions) -> float:
    p = np.asarray(proportions, dtype=np.float64)
    if ((p < 0) | (p > 1)).any():
        raise ValueError("proportions must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"proportions sum to {p.sum()}, not 1")
    return float(1.0 - (p * p).sum())


def sensitive_indicator(table: Table, sensitive_col: str) -> np.ndarray:
    """0/1 coding of a two-valued sensitive column (minority, or the
    lexicographically larger label, coded 1)."""
    col = table[sensitive_col]
    labels = sorted(set(col.formatted()) - {""}) if col.dtype != "bool" else ["0", "1"]
    strings = np.array(col.formatted(), dtype=object)
    if set(labels) <= {MAJORITY, MINORITY}:
        return strings == MINORITY
    if len(labels) > 2:
        raise ValueError(f"sensitive column {sensitive_col!r} has {len(labels)} values; binarize it first")
    return strings == labels[-1]


def _feature_matrix(table: Table, sensitive_col: str) -> tuple[list[str], np.ndarray]:
    names = [n for n in table.feature_names if n != sensitive_col]
    return names, table.numeric_matrix(names)


def bivariate_correlations(table: Table, sensitive_col: str) -> tuple[float, float]:
    """Mean and max absolute Pearson correlation of features with the sensitive coding."""
    names, X = _feature_matrix(table, sensitive_col)
    if not names:
        raise ValueError("table has no non-sensitive features")
    s = sensitive_indicator(table, sensitive_col).astype(np.float64)
    ds = s - s.mean()
    dX = X - X.mean(axis=0)
    denom = np.sqrt((dX * dX).sum(axis=0) * (ds @ ds))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, np.abs(dX.T @ ds) / np.where(denom > 0, denom, 1.0), 0.0)
    corr = np.minimum(corr, 1.0)
    return float(corr.mean()), float(corr.max())


def stratified_holdout(labels: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = make_rng(seed)
    train, test = [], []
    for cls in (False, True):
        idx = np.flatnonzero(labels == cls)
        n_test = int(round(fraction * len(idx)))
        if n_test == 0 or n_test == len(idx):
            raise InsufficientSupportError(f"class {int(cls)} has {len(idx)} rows; cannot hold out both parts")
        idx = rng.permutation(idx)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def sensitive_auc(table: Table, sensitive_col: str, seed: int = 0, n_trees: int = 100) -> float:
    """Holdout ROC-AUC of a random forest predicting the sensitive attribute from the features."""
    names, X = _feature_matrix(table, sensitive_col)
    if not names:
        raise ValueError("table has no non-sensitive features")
    if np.isnan(X).any():
        raise ValueError("features contain missing values")
    s = sensitive_indicator(table, sensitive_col)
    train, test = stratified_holdout(s, HOLDOUT_FRACTION, seed)
    forest = fit_random_forest(X[train], s[train], n_trees=n_trees, seed=seed)
    return roc_auc(rf_predict_proba(forest, X[test]), s[test])


def _ratio(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    hi = max(a, b)
    return None if hi == 0 else min(a, b) / hi


def profile_dataset(
    pre_table: Table,
    post_table: Table,
    annotation: DatasetAnnotation,
    scenario: Scenario,
    seed: int = 0,
    n_trees: int = 100,
) -> MetaProfile:
    """Fill every metadata field.

    ``post_table`` must come from the binarized preset, so it carries one
    sensitive column labelled majority/minority and a bool target.
    Per-group missingness uses the pre-transform rows, which line up with
    the post-transform rows because the preset imputes instead of dropping.
    """
    prof = MetaProfile()
    miss = pre_table.missing_matrix()
    prof.meta_pretrans_n_rows = pre_table.n_rows
    prof.meta_pretrans_n_cols = pre_table.n_cols
    prof.meta_n_rows = post_table.n_rows
    prof.meta_n_cols = post_table.n_cols
    if miss.size:
        prof.meta_pretrans_prop_NA_rows = float(miss.any(axis=1).mean())
        prof.meta_pretrans_prop_NA_cols = float(miss.any(axis=0).mean())
        prof.meta_pretrans_prop_NA_cells = float(miss.mean())

    dtypes = [c.dtype for c in post_table.columns]
    if dtypes:
        prof.meta_prop_cols_float = dtypes.count("float") / len(dtypes)
        prof.meta_prop_cols_int = dtypes.count("int") / len(dtypes)
        prof.meta_prop_cols_bool = dtypes.count("bool") / len(dtypes)

    prof.meta_pretrans_unique_group_counts_pre_agg = [
        len(set(pre_table[a].present().tolist())) for a in scenario.sensitive_selection
    ]

    (sens_name,) = post_table.sensitive_names
    minority = sensitive_indicator(post_table, sens_name)
    n = post_table.n_rows
    n_min = int(minority.sum())
    p_min = n_min / n
    p_maj = 1.0 - p_min
    prof.meta_prev_sens_minority = p_min
    prof.meta_prev_sens_majority = p_maj
    prof.meta_prev_sens_difference = abs(p_maj - p_min)
    prof.meta_prev_sens_ratio = _ratio(p_min, p_maj)
    prof.meta_prev_sens_gini = gini_simpson([p_min, p_maj])

    if pre_table.n_rows == n and miss.size:
        row_na = miss.any(axis=1)
        prof.meta_prop_NA_sens_minority = float(row_na[minority].mean()) if n_min else None
        prof.meta_prop_NA_sens_majority = float(row_na[~minority].mean()) if n_min < n else None

    target = post_table[post_table.target_name].values.astype(np.float64)
    prof.meta_base_rate_target = float(target.mean())
    br_min = float(target[minority].mean()) if n_min else None
    br_maj = float(target[~minority].mean()) if n_min < n else None
    prof.meta_base_rate_target_sens_minority = br_min
    prof.meta_base_rate_target_sens_majority = br_maj
    if br_min is not None and br_maj is not None:
        prof.meta_base_rate_difference = abs(br_maj - br_min)
        prof.meta_base_rate_ratio = _ratio(br_min, br_maj)
        total = br_min + br_maj
        if total > 0:
            prof.meta_base_rate_sens_gini = gini_simpson([br_min / total, br_maj / total])

    if post_table.feature_names:
        avg, mx = bivariate_correlations(post_table, sens_name)
        prof.meta_average_absolute_correlation = avg
        prof.meta_maximum_absolute_correlation = mx
        prof.meta_sens_predictability_roc_auc = sensitive_auc(post_table, sens_name, seed, n_trees)
    return prof
