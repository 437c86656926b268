"""Deterministic synthetic datasets.

These stand in for real corpus entries when working offline and back the
``synthetic://<name>?n=<rows>&seed=<seed>`` download scheme.
"""

from __future__ import annotations

import csv
import io
from urllib.parse import parse_qs, urlparse

import numpy as np

from .errors import FetchError
from .frame import Column, Table, make_rng
from .manifest import DatasetAnnotation, FeatureSelector, Scenario, scenario_id_for


def _to_csv(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def credit_rows(n: int = 2000, seed: int = 0):
    """Credit-scoring style data with a group-dependent base rate and missing cells."""
    rng = make_rng(seed)
    sex = rng.choice(["male", "female"], size=n, p=[0.65, 0.35])
    race = rng.choice(["white", "black", "asian"], size=n, p=[0.6, 0.25, 0.15])
    age = rng.integers(18, 80, size=n)
    income = np.round(rng.lognormal(10.3, 0.5, size=n) * np.where(sex == "female", 0.85, 1.0), 2)
    savings = rng.choice(["low", "medium", "high"], size=n, p=[0.5, 0.35, 0.15])
    purpose = rng.choice(["car", "education", "furniture", "business", "repairs", "travel"], size=n)
    years_employed = rng.poisson(6, size=n)
    score = (
        0.9 * (np.log(income) - 10.3) / 0.5
        + 0.02 * (age - 45)
        + np.select([savings == "high", savings == "medium"], [1.0, 0.4], -0.3)
        - 0.5 * (race == "black")
        + rng.normal(0, 1, size=n)
    )
    target = np.where(score > -0.2, "good", "bad")
    income_missing = rng.random(n) < 0.03
    savings_missing = rng.random(n) < 0.05
    header = ["sex", "race", "age", "income", "savings", "purpose", "years_employed", "credit"]
    rows = []
    for i in range(n):
        rows.append(
            [
                sex[i],
                race[i],
                int(age[i]),
                "" if income_missing[i] else f"{income[i]:.2f}",
                "?" if savings_missing[i] else savings[i],
                purpose[i],
                int(years_employed[i]),
                target[i],
            ]
        )
    return header, rows


GENERATORS = {"credit": credit_rows}


def synthetic_bytes(url: str) -> bytes:
    parsed = urlparse(url)
    name = parsed.netloc or parsed.path.lstrip("/")
    if name not in GENERATORS:
        raise FetchError(f"unknown synthetic dataset {name!r}")
    query = {k: int(v[0]) for k, v in parse_qs(parsed.query).items()}
    return _to_csv(*GENERATORS[name](**query))


def synthetic_annotation(dataset_id: str = "synthetic_credit", n: int = 2000, seed: int = 0, **overrides) -> DatasetAnnotation:
    fields = dict(
        dataset_id=dataset_id,
        dataset_name="Synthetic Credit",
        is_accessible="public",
        format="delimited",
        sensitive_attributes=("sex", "race"),
        sensitive_categories={"sex": ("male", "female"), "race": ("white", "black", "asian")},
        feature_selector=FeatureSelector("all"),
        target_column="credit",
        license_permissive=True,
        license="CC0 1.0",
        country="n/a",
        domain="finance",
        download_url=f"synthetic://credit?n={n}&seed={seed}",
        target_lvl_good="good",
        target_lvl_bad="bad",
        sample_size_hint=n,
    )
    fields.update(overrides)
    return DatasetAnnotation(**fields)


def messy_table(rng: np.random.Generator, n_rows: int | None = None):
    """Random table with mixed dtypes, missing cells and a high-cardinality text column.

    Returns ``(table, annotation, scenario)`` ready for the transform pipeline.
    """
    n = int(n_rows or rng.integers(20, 300))
    cols: list[Column] = []

    def missing_mask(rate):
        return rng.random(n) < rate

    n_sens = int(rng.integers(1, 4))
    sens_names = [f"s{i}" for i in range(n_sens)]
    for name in sens_names:
        k = int(rng.integers(1, 5))
        labels = np.array([f"g{j}" for j in range(k)], dtype=object)
        vals = labels[rng.integers(0, k, size=n)]
        cols.append(Column(name, "categorical", vals, missing_mask(rng.choice([0.0, 0.05]))))

    for j in range(int(rng.integers(1, 4))):
        cols.append(Column(f"f{j}", "float", rng.normal(size=n), missing_mask(rng.choice([0.0, 0.1]))))
    for j in range(int(rng.integers(0, 3))):
        cols.append(Column(f"i{j}", "int", rng.integers(-5, 50, size=n), missing_mask(rng.choice([0.0, 0.1]))))
    for j in range(int(rng.integers(0, 2))):
        cols.append(Column(f"b{j}", "bool", rng.random(n) < 0.4, missing_mask(rng.choice([0.0, 0.1]))))
    for j in range(int(rng.integers(0, 3))):
        k = int(rng.integers(2, 8))
        vals = np.array([f"c{v}" for v in rng.integers(0, k, size=n)], dtype=object)
        cols.append(Column(f"c{j}", "categorical", vals, missing_mask(rng.choice([0.0, 0.1]))))
    if rng.random() < 0.5:
        vocab = int(rng.integers(150, 450))
        vals = np.array([f"t{v}" for v in rng.integers(0, vocab, size=max(n, 1))[:n]], dtype=object)
        cols.append(Column("txt", "text", vals, missing_mask(0.05)))

    kind = rng.choice(["labels", "numeric"])
    good = None
    if kind == "labels":
        k = int(rng.integers(2, 4))
        labels = np.array(["yes", "no", "maybe"][:k], dtype=object)
        tv = labels[rng.integers(0, k, size=n)]
        tv[:k] = labels  # every label present
        cols.append(Column("y", "categorical", tv, missing_mask(rng.choice([0.0, 0.05]))))
        good = "yes" if rng.random() < 0.5 else None
    else:
        tv = rng.integers(0, 3, size=n)
        tv[:2] = [0, 1]
        cols.append(Column("y", "int", tv, np.zeros(n, dtype=bool)))

    order = rng.permutation(len(cols))
    table = Table(tuple(cols[i] for i in order))
    feature_names = [c.name for c in cols if c.name not in sens_names and c.name != "y"]
    selector = FeatureSelector("all") if rng.random() < 0.5 else FeatureSelector(
        "include", tuple(sorted(rng.choice(feature_names, size=max(1, len(feature_names) // 2), replace=False)))
    )
    annotation = DatasetAnnotation(
        dataset_id="messy",
        dataset_name="Messy",
        is_accessible="public",
        format="delimited",
        sensitive_attributes=tuple(sens_names),
        sensitive_categories={s: () for s in sens_names},
        feature_selector=selector,
        target_column="y",
        license_permissive=True,
        country="n/a",
        domain="synthetic",
        target_lvl_good=good,
    )
    k = 1 if n_sens == 1 or rng.random() < 0.4 else 2
    selection = tuple(sens_names[:k])
    scenario = Scenario(scenario_id_for("messy", selection), "messy", selection)
    return table, annotation, scenario


def independent_table(n: int, seed: int, n_features: int = 4) -> Table:
    """Binary sensitive column with features drawn independently of it."""
    rng = make_rng(seed)
    sens = np.where(rng.random(n) < 0.4, "minority", "majority").astype(object)
    cols = [Column(f"x{j}", "float", rng.normal(size=n), np.zeros(n, bool)) for j in range(n_features)]
    cols.append(Column("group", "categorical", sens, np.zeros(n, bool)))
    cols.append(Column("y", "bool", rng.random(n) < 0.5, np.zeros(n, bool)))
    roles = {"group": "sensitive", "y": "target"}
    return Table(tuple(cols), roles)


def proxy_table(n: int, seed: int, n_noise: int = 3) -> Table:
    """Like ``independent_table`` plus one feature that copies the sensitive coding."""
    base = independent_table(n, seed, n_noise)
    proxy = (base["group"].values == "minority").astype(np.float64)
    cols = [Column("proxy", "float", proxy, np.zeros(n, bool)), *base.columns]
    return Table(tuple(cols), base.roles)
