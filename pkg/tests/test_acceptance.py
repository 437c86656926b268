"""Acceptance gate: one test per primary criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import csv
import io
import json
import time
from math import comb

import numpy as np
import pytest

from faircorpus.cli import main
from faircorpus.errors import DegenerateTargetError
from faircorpus.fairness import (
    BASELINE,
    DELTA_HEADER,
    GroupedPredictions,
    ScoreRecord,
    balanced_accuracy,
    compute_metrics,
    delta_scores,
    deltas_from_csv,
    demographic_parity_difference,
    equalized_odds_difference,
    f1_score,
)
from faircorpus.frame import Column, Table, make_rng
from faircorpus.harness import BenchmarkPlan, Method, register_method, run_benchmark, runs_to_csv
from faircorpus.interventions import THRESHOLD_GRID, apply_group_thresholds, disparate_impact_repair, fit_group_thresholds
from faircorpus.learn import fit_logistic, log_loss, log_loss_gradient, predict, roc_auc
from faircorpus.manifest import CorpusRegistry, Scenario, enumerate_scenarios, parse_manifest
from faircorpus.profile import gini_simpson, profile_dataset, sensitive_auc
from faircorpus.select import SelectionConstraints, greedy_select, spearman
from faircorpus.synthetic import independent_table, messy_table, proxy_table, synthetic_annotation
from faircorpus.transform import MAJORITY, MINORITY, TransformConfig, replay_transform, transform_pipeline

import oracles
from conftest import manifest_text, minimal_annotation


VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    def report(name: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, f"{name}: {detail}"

    return report


def _gp(tp, fn, tn, fp, group=None):
    y = [1] * (tp + fn) + [0] * (tn + fp)
    y_hat = [1] * tp + [0] * fn + [0] * tn + [1] * fp
    return GroupedPredictions(np.array(y), np.array(y_hat), np.array(group or ["a"] * len(y)))


def test_metric_equations(verdict):
    start = time.perf_counter()
    exact = [
        abs(balanced_accuracy(_gp(3, 1, 2, 2)) - 0.625) <= 1e-12,
        abs(f1_score(_gp(3, 2, 0, 1)) - 2 / 3) <= 1e-12,
    ]
    # TPR 0.8 vs 0.5
    y = np.array([1] * 5 + [0] * 3 + [1] * 2 + [0] * 5)
    y_hat = np.array([1, 1, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1])
    g = np.array(["a"] * 8 + ["b"] * 7)
    exact.append(abs(equalized_odds_difference(GroupedPredictions(y, y_hat, g)) - 0.3) <= 1e-12)
    # selection rates 0.6 vs 0.2
    gp = GroupedPredictions(np.zeros(10), np.array([1, 1, 1, 0, 0, 1, 0, 0, 0, 0]), np.array(["a"] * 5 + ["b"] * 5))
    exact.append(abs(demographic_parity_difference(gp) - 0.4) <= 1e-12)

    rng = make_rng(2024)
    invariant_ok = True
    for _ in range(1000):
        n = int(rng.integers(4, 40))
        y, y_hat = rng.random(n) < 0.5, rng.random(n) < 0.5
        g = np.where(rng.random(n) < 0.5, "a", "b")
        base = compute_metrics(GroupedPredictions(y, y_hat, g))
        perm = rng.permutation(n)
        permuted = compute_metrics(GroupedPredictions(y[perm], y_hat[perm], g[perm]))
        swapped = compute_metrics(GroupedPredictions(y, y_hat, np.where(g == "a", "b", "a")))
        flipped = balanced_accuracy(GroupedPredictions(~y, ~y_hat, g))
        invariant_ok &= permuted == base
        invariant_ok &= (swapped.eod, swapped.dpd) == (base.eod, base.dpd)
        invariant_ok &= (flipped is None and base.bacc is None) or abs(flipped - base.bacc) <= 1e-12
    elapsed = time.perf_counter() - start
    ok = all(exact) and invariant_ok and elapsed < 1.0
    verdict("metric equations", ok, f"fixtures={all(exact)} invariants={invariant_ok} runtime={elapsed:.3f}s")


def test_delta_scores(verdict):
    recs = [ScoreRecord("s", BASELINE, 1, "bacc", 0.80), ScoreRecord("s", "m", 1, "bacc", 0.72)]
    out = {r.method: r.delta for r in delta_scores(recs)}
    ok = out[BASELINE] == 0.0 and abs(out["m"] - (-0.08)) <= 1e-12
    verdict("delta scores", ok, f"self={out[BASELINE]} subtraction={out['m']!r}")


def _random_selection_case(rng):
    n = int(rng.integers(2, 9))
    a = rng.uniform(-1, 1, size=(n, n))
    corr = (a + a.T) / 2
    if rng.random() < 0.3:
        corr = np.round(corr, 1)
    np.fill_diagonal(corr, 1.0)
    datasets = [f"d{int(rng.integers(0, max(1, n - 1)))}" for _ in range(n)]
    ids = [f"{d}::s{i}" for i, d in enumerate(datasets)]
    mode = rng.integers(0, 3)
    k = int(rng.integers(1, n + 1)) if mode != 1 else None
    tau = float(rng.uniform(-0.6, 0.6)) if mode != 0 else None
    return corr, ids, datasets, k, tau


def test_selection_algorithm(verdict):
    start = time.perf_counter()
    ids = ["A::s", "B::s", "C::s", "D::s"]
    hand = np.array([[1, 0.9, -0.2, 0.1], [0.9, 1, 0.0, 0.3], [-0.2, 0.0, 1, -0.5], [0.1, 0.3, -0.5, 1]])
    k2 = greedy_select(hand, ids, SelectionConstraints(k=2)).scenario_ids
    t0 = greedy_select(hand, ids, SelectionConstraints(tau=0.0)).scenario_ids
    hand_ok = k2 == ["C::s", "D::s"] and t0 == ["C::s", "D::s", "A::s"]

    rng = make_rng(99)
    agree = 0
    for _ in range(100):
        corr, sids, datasets, k, tau = _random_selection_case(rng)
        got = greedy_select(corr, sids, SelectionConstraints(k=k, tau=tau))
        expected = oracles.greedy(corr.tolist(), sids, [{d} for d in datasets], k, tau)
        same = len(got.entries) == len(expected) and all(
            e.scenario_id == sid and abs(e.avg_correlation_at_insertion - v) <= 1e-12
            for e, (sid, v) in zip(got.entries, expected)
        )
        agree += same
    elapsed = time.perf_counter() - start
    ok = hand_ok and agree == 100 and elapsed < 10
    verdict("selection algorithm", ok, f"k=2 {k2}, tau=0 {t0}, oracle agreement {agree}/100, runtime={elapsed:.2f}s")


def test_spearman(verdict):
    rng = make_rng(7)
    worst, undefined_mismatch = 0.0, 0
    for _ in range(1000):
        n = int(rng.integers(3, 30))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
        got, ref = spearman(x, y), oracles.spearman(x.tolist(), y.tolist())
        if got is None or ref is None:
            undefined_mismatch += (got is None) != (ref is None)
            continue
        worst = max(worst, abs(got - ref))
    ok = worst <= 1e-12 and undefined_mismatch == 0
    verdict("spearman vs rank-then-pearson", ok, f"max abs diff {worst:.2e}")


def test_transform_pipeline(verdict):
    rng = make_rng(31337)
    failures, degenerate, replay_bad = [], 0, 0
    for i in range(200):
        table, annotation, scenario = messy_table(rng)
        try:
            out, report = transform_pipeline(table, annotation, scenario, TransformConfig.binarized())
        except DegenerateTargetError:
            degenerate += 1
            continue
        problems = []
        if out.missing_matrix().any():
            problems.append("missing cells")
        if out[out.target_name].dtype != "bool":
            problems.append("target not bool")
        sens = out.sensitive_names
        if len(sens) != 1 or not set(out[sens[0]].to_list()) <= {MAJORITY, MINORITY}:
            problems.append("sensitive not binary")
        if any(out[n].dtype not in ("bool", "int", "float") for n in out.feature_names):
            problems.append("non-numeric feature")
        if any(len(m["values"]) > 200 for m in report.category_maps.values()):
            problems.append("cardinality cap")
        if problems:
            failures.append((i, problems))
        if replay_transform(table, report).to_csv() != out.to_csv():
            replay_bad += 1
    ok = not failures and replay_bad == 0 and degenerate == 0
    verdict(
        "transform pipeline on 200 messy tables",
        ok,
        f"violations={failures[:3]} replay mismatches={replay_bad} degenerate={degenerate}",
    )


def test_profiler(verdict):
    start = time.perf_counter()
    fixtures_ok = abs(gini_simpson([0.7, 0.3]) - 0.42) <= 1e-12 and gini_simpson([0.5, 0.5]) == 0.5

    groups = ["M"] * 70 + ["F"] * 30
    targets = ["good", "bad"] * 50
    pre = Table.from_dict(
        {"sex": groups, "x": [float(i % 5) for i in range(100)], "y": targets},
        {"sex": "categorical", "x": "float", "y": "categorical"},
    )
    a = synthetic_annotation(sensitive_attributes=("sex",), sensitive_categories={"sex": ()}, target_column="y")
    sc = Scenario("t::sex", a.dataset_id, ("sex",))
    post, _ = transform_pipeline(pre, a, sc, TransformConfig.binarized())
    p = profile_dataset(pre, post, a, sc, n_trees=5)
    fixtures_ok &= abs(p.meta_prev_sens_ratio - 3 / 7) <= 1e-12 and round(p.meta_prev_sens_ratio, 4) == 0.4286
    fixtures_ok &= abs(p.meta_prev_sens_difference - 0.4) <= 1e-12 and abs(p.meta_prev_sens_gini - 0.42) <= 1e-12

    balanced = ["M", "F"] * 50
    pre_b = Table.from_dict(
        {"sex": balanced, "x": [float(i % 5) for i in range(100)], "y": ["good", "good", "bad", "bad"] * 25},
        {"sex": "categorical", "x": "float", "y": "categorical"},
    )
    post_b, _ = transform_pipeline(pre_b, a, sc, TransformConfig.binarized())
    pb = profile_dataset(pre_b, post_b, a, sc, n_trees=5)
    fixtures_ok &= pb.meta_prev_sens_gini == 0.5 and pb.meta_base_rate_difference == 0.0 and pb.meta_base_rate_ratio == 1.0
    two_by_two = Table.from_dict({"a": [1.0, None], "b": ["x", "y"]}, {"a": "float", "b": "categorical"})
    fixtures_ok &= float(two_by_two.missing_matrix().mean()) == 0.25

    indep = [sensitive_auc(independent_table(2000, s), "group", seed=s) for s in range(3)]
    proxy = [sensitive_auc(proxy_table(2000, s), "group", seed=s) for s in range(3)]
    elapsed = time.perf_counter() - start
    ok = fixtures_ok and all(0.45 <= v <= 0.55 for v in indep) and all(v >= 0.95 for v in proxy) and elapsed < 60
    verdict(
        "profiler",
        ok,
        f"fixtures={fixtures_ok} independent AUC={[round(v, 3) for v in indep]} proxy AUC={[round(v, 3) for v in proxy]} runtime={elapsed:.1f}s",
    )


def test_learners(verdict):
    rng = make_rng(5)
    worst = 0.0
    for _ in range(50):
        n, d = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        Z = rng.normal(size=(n, d))
        y = rng.random(n) < 0.5
        w, b = rng.normal(size=d), float(rng.normal())
        l2 = float(rng.choice([0.0, 1e-6, 0.1]))
        gw, gb = log_loss_gradient(w, b, Z, y, l2)
        h = 1e-6
        num_w = np.array(
            [(log_loss(w + h * e, b, Z, y, l2) - log_loss(w - h * e, b, Z, y, l2)) / (2 * h) for e in np.eye(d)]
        )
        num_b = (log_loss(w, b + h, Z, y, l2) - log_loss(w, b - h, Z, y, l2)) / (2 * h)
        analytic, numeric = np.append(gw, gb), np.append(num_w, num_b)
        rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        worst = max(worst, float(rel.max()))

    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [3, 3], [3, 4], [4, 3], [4, 4]], float)
    ys = np.array([0, 0, 0, 0, 1, 1, 1, 1], bool)
    sep_acc = float((predict(fit_logistic(X, ys), X) == ys).mean())

    auc_worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 25))
        labels = rng.random(n) < 0.5
        labels[0], labels[-1] = True, False
        scores = np.round(rng.random(n), 1)
        auc_worst = max(auc_worst, abs(roc_auc(scores, labels) - oracles.auc_pairs(scores.tolist(), labels.tolist())))
    ok = worst <= 1e-4 and sep_acc == 1.0 and auc_worst <= 1e-12
    verdict("learners", ok, f"grad rel err {worst:.2e}, separable acc {sep_acc}, auc max diff {auc_worst:.2e}")


def test_interventions(verdict):
    rng = make_rng(8)
    n = 400
    base = rng.normal(size=n)
    z = np.zeros(2 * n, bool)
    t = Table(
        (
            Column("x", "float", np.concatenate([base, base + 2.5]), z),
            Column("g", "categorical", np.array(["a"] * n + ["b"] * n, dtype=object), z),
            Column("y", "bool", rng.random(2 * n) < 0.5, z),
        ),
        {"g": "sensitive", "y": "target"},
    )
    out = disparate_impact_repair(t, "g", 1.0)
    x = out["x"].values.astype(float)
    qs = np.linspace(0, 1, 21)
    gap = float(np.max(np.abs(np.quantile(x[:n], qs) - np.quantile(x[n:], qs))))
    identity = disparate_impact_repair(t, "g", 0.0).to_csv() == t.to_csv()

    dominated = 0
    cases = 0
    for seed in range(10):
        r = make_rng(seed)
        m = int(r.integers(8, 30))
        scores = np.round(r.random(m), 2)
        group = np.where(r.random(m) < 0.5, "a", "b")
        group[:2] = ["a", "b"]
        y = r.random(m) < 0.5
        fitted = fit_group_thresholds(scores, group, y, "dpd")
        fitted_dpd = demographic_parity_difference(GroupedPredictions(y, apply_group_thresholds(scores, group, fitted), group))
        shared = [demographic_parity_difference(GroupedPredictions(y, scores >= th, group)) for th in THRESHOLD_GRID]
        cases += 1
        dominated += all(fitted_dpd <= s + 1e-12 for s in shared)
    ok = gap <= 1e-6 and identity and dominated == cases
    verdict("interventions", ok, f"DIR quantile gap {gap:.2e}, lambda=0 identity {identity}, dpd dominance {dominated}/{cases}")


class _Broken(Method):
    def fit(self, train, context):
        raise RuntimeError("always fails")


register_method("acceptance_broken", _Broken)


def test_harness_accounting(verdict, cache_dir):
    registry = CorpusRegistry((synthetic_annotation(n=300, seed=9),))
    scenarios = enumerate_scenarios(registry.get("synthetic_credit"))[:2]
    plan = BenchmarkPlan(scenarios, methods=[BASELINE, "dir", "group_thresholds_eod", "group_thresholds_dpd"])
    runs, deltas = run_benchmark(plan, registry)
    again, deltas_again = run_benchmark(plan, registry)
    from faircorpus.fairness import deltas_to_csv

    count_ok = len(runs) == 2 * 4 * 5 == 40
    identical = runs_to_csv(runs) == runs_to_csv(again) and deltas_to_csv(deltas) == deltas_to_csv(deltas_again)
    broken_plan = BenchmarkPlan(scenarios, methods=[BASELINE, "acceptance_broken", "dir"], seeds=(1, 2))
    broken_runs, _ = run_benchmark(broken_plan, registry)
    isolated = all((r.status == "error") == (r.method == "acceptance_broken") for r in broken_runs)
    ok = count_ok and identical and isolated
    verdict("harness accounting", ok, f"records={len(runs)} byte-identical={identical} isolation={isolated}")


def test_scenario_rule(verdict):
    counts = {}
    for s in (1, 2, 3, 4, 5):
        attrs = [f"a{i}" for i in range(s)]
        reg = parse_manifest(manifest_text(minimal_annotation(sensitive_attributes=attrs, sensitive_categories={x: [] for x in attrs})))
        counts[s] = len(enumerate_scenarios(reg.get("toy")))
    ok = counts == {1: 1, 2: 3, 3: 6, 4: 4, 5: 5}
    verdict("scenario rule", ok, str(counts))


def _cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_end_to_end_smoke(verdict, tmp_path, cache_dir):
    start = time.perf_counter()
    steps = {}
    steps["fetch"] = _cli(["fetch", "synthetic_credit", "--out", str(tmp_path / "fetch.json")])
    steps["transform"] = _cli(["transform", "synthetic_credit", "--binarize", "--out", str(tmp_path / "t.csv")])
    steps["profile"] = _cli(["profile", "synthetic_credit", "--out", str(tmp_path / "profile.json")])
    steps["bench"] = _cli(["bench", "--scenarios", "synthetic_credit", "--out-dir", str(tmp_path / "bench")])
    steps["select"] = _cli(["select", "--deltas", str(tmp_path / "bench" / "deltas.csv"), "--k", "3", "--out", str(tmp_path / "collection.json")])
    elapsed = time.perf_counter() - start

    problems = [f"{k} exit {v}" for k, v in steps.items() if v != 0]
    if not problems:
        fetch_doc = json.loads((tmp_path / "fetch.json").read_text())
        if {"dataset_id", "sha256", "from_cache"} - set(fetch_doc):
            problems.append("fetch json")
        rows = list(csv.reader((tmp_path / "t.csv").open()))
        if any(c == "" for r in rows for c in r) or not (tmp_path / "t.report.json").exists():
            problems.append("transform output")
        profiles = json.loads((tmp_path / "profile.json").read_text())
        if sorted(profiles) != ["synthetic_credit::race", "synthetic_credit::sex", "synthetic_credit::sex+race"]:
            problems.append("profile keys")
        if any(not all(k.startswith("meta_") for k in p) for p in profiles.values()):
            problems.append("profile fields")
        runs = list(csv.DictReader((tmp_path / "bench" / "runs.csv").open()))
        if len(runs) != 3 * 4 * 5 or any(r["status"] != "ok" for r in runs):
            problems.append("runs.csv")
        header = (tmp_path / "bench" / "deltas.csv").read_text().splitlines()[0]
        if header != ",".join(DELTA_HEADER):
            problems.append("deltas header")
        if not (tmp_path / "bench" / "deltas.png").exists():
            problems.append("delta figure")
        coll = json.loads((tmp_path / "collection.json").read_text())
        if set(coll) != {"constraints", "entries"} or len(coll["entries"]) != 1:
            problems.append("collection json")
    ok = not problems and elapsed < 300
    verdict("end-to-end smoke (synthetic stand-in)", ok, f"problems={problems} runtime={elapsed:.1f}s")
