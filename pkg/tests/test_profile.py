from __future__ import annotations

import numpy as np
import pytest

from faircorpus.errors import InsufficientSupportError
from faircorpus.frame import Column, Table
from faircorpus.manifest import Scenario
from faircorpus.profile import (
    bivariate_correlations,
    gini_simpson,
    profile_dataset,
    sensitive_auc,
    stratified_holdout,
)
from faircorpus.synthetic import independent_table, synthetic_annotation
from faircorpus.transform import TransformConfig, transform_pipeline


@pytest.mark.parametrize("p, expected", [((0.5, 0.5), 0.5), ((1.0, 0.0), 0.0), ((0.7, 0.3), 0.42)])
def test_gini(p, expected):
    assert gini_simpson(p) == pytest.approx(expected, abs=1e-12)


def test_gini_rejects_non_distribution():
    with pytest.raises(ValueError):
        gini_simpson([0.5, 0.6])


def _sens_table(features: dict, groups):
    n = len(groups)
    cols = [Column(k, "float", np.asarray(v, float), np.zeros(n, bool)) for k, v in features.items()]
    cols.append(Column("g", "categorical", np.array(groups, dtype=object), np.zeros(n, bool)))
    return Table(tuple(cols), {"g": "sensitive"})


def test_correlation_fixtures():
    groups = ["minority", "majority"] * 10
    s = [1.0, 0.0] * 10
    assert bivariate_correlations(_sens_table({"x": s}, groups), "g")[1] == pytest.approx(1.0)
    assert bivariate_correlations(_sens_table({"c": [3.0] * 20}, groups), "g") == (0.0, 0.0)
    avg, mx = bivariate_correlations(_sens_table({"x": s, "c": [3.0] * 20}, groups), "g")
    assert avg == pytest.approx(0.5) and mx == pytest.approx(1.0)


def test_constant_features_auc_half():
    groups = ["minority"] * 30 + ["majority"] * 70
    t = _sens_table({"c": [1.0] * 100}, groups)
    assert sensitive_auc(t, "g", seed=0, n_trees=5) == pytest.approx(0.5, abs=1e-12)


def test_stratified_holdout_keeps_classes():
    labels = np.array([True] * 30 + [False] * 70)
    train, test = stratified_holdout(labels, 0.3, 0)
    assert labels[test].sum() == 9 and (~labels[test]).sum() == 21
    assert set(train).isdisjoint(test)
    with pytest.raises(InsufficientSupportError):
        stratified_holdout(np.array([True, False, False]), 0.3, 0)


def test_auc_row_order_invariance():
    t = independent_table(2000, 4)
    perm = np.random.default_rng(0).permutation(t.n_rows)
    a = sensitive_auc(t, "group", seed=1, n_trees=30)
    b = sensitive_auc(t.take(perm), "group", seed=1, n_trees=30)
    assert abs(a - b) <= 0.02 or (0.45 <= a <= 0.55 and 0.45 <= b <= 0.55)


def _profile_fixture(groups, targets, extra_missing=False):
    n = len(groups)
    x = [float(i % 7) for i in range(n)]
    rows = {"sex": list(groups), "x": [None if extra_missing and i == 0 else v for i, v in enumerate(x)], "y": list(targets)}
    pre = Table.from_dict(rows, {"sex": "categorical", "x": "float", "y": "categorical"}, {"sex": "sensitive", "y": "target"})
    a = synthetic_annotation(
        sensitive_attributes=("sex",), sensitive_categories={"sex": ()}, target_column="y",
        target_lvl_good="good", target_lvl_bad="bad",
    )
    sc = Scenario("t::sex", a.dataset_id, ("sex",))
    post, _ = transform_pipeline(pre, a, sc, TransformConfig.binarized())
    return profile_dataset(pre, post, a, sc, seed=0, n_trees=5)


def test_prevalence_fixture():
    groups = ["M"] * 70 + ["F"] * 30
    targets = (["good", "bad"] * 50)
    p = _profile_fixture(groups, targets)
    assert p.meta_prev_sens_minority == pytest.approx(0.3, abs=1e-12)
    assert p.meta_prev_sens_difference == pytest.approx(0.4, abs=1e-12)
    assert p.meta_prev_sens_ratio == pytest.approx(3 / 7, abs=1e-12)
    assert round(p.meta_prev_sens_ratio, 4) == 0.4286
    assert p.meta_prev_sens_gini == pytest.approx(0.42, abs=1e-12)
    assert p.meta_pretrans_unique_group_counts_pre_agg == [2]


def test_balanced_fixture():
    groups = ["M", "F"] * 50
    targets = ["good", "good", "bad", "bad"] * 25
    p = _profile_fixture(groups, targets)
    assert p.meta_prev_sens_gini == pytest.approx(0.5, abs=1e-12)
    assert p.meta_base_rate_difference == pytest.approx(0.0, abs=1e-12)
    assert p.meta_base_rate_ratio == pytest.approx(1.0, abs=1e-12)
    assert p.meta_base_rate_sens_gini == pytest.approx(0.5, abs=1e-12)
    assert p.meta_base_rate_target == pytest.approx(0.5, abs=1e-12)


def test_missing_cell_fraction():
    pre = Table.from_dict({"a": [1.0, None], "b": ["x", "y"]}, {"a": "float", "b": "categorical"})
    miss = pre.missing_matrix()
    assert miss.mean() == 0.25
    groups = ["M", "F"] * 10
    p = _profile_fixture(groups, ["good", "bad", "bad", "good"] * 5, extra_missing=True)
    assert p.meta_pretrans_prop_NA_cells == pytest.approx(1 / 60, abs=1e-12)
    assert p.meta_pretrans_prop_NA_rows == pytest.approx(1 / 20, abs=1e-12)
    # 10/10 tie: "F" sorts first and becomes the majority; the missing cell is in an "M" row
    assert p.meta_prop_NA_sens_minority == pytest.approx(0.1, abs=1e-12)
    assert p.meta_prop_NA_sens_majority == 0.0


def test_profile_json_has_all_fields():
    import json

    p = _profile_fixture(["M"] * 12 + ["F"] * 8, ["good", "bad"] * 10)
    doc = json.loads(p.to_json())
    assert all(k.startswith("meta_") for k in doc)
    assert doc["meta_sens_predictability_roc_auc"] is not None
    assert doc["meta_n_rows"] == 20
