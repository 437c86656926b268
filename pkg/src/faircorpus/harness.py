"""Benchmark loop over scenarios x methods x seeds.

Each (scenario, method, seed) cell is isolated: an exception or a timeout in
one cell is recorded in its ``RunRecord`` and the sweep moves on.

Methods are plug-ins.  Subclass ``Method`` and register a factory::

    class MyMethod(Method):
        def fit(self, train, context): ...
        def predict(self, test): return y_hat, scores

    register_method("my_method", MyMethod)

Both hooks receive binarized tables: bool target, one sensitive column
labelled majority/minority, numeric/bool features.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .fairness import (
    BASELINE,
    METRICS,
    DeltaRecord,
    GroupedPredictions,
    MetricSet,
    ScoreRecord,
    compute_metrics,
    delta_scores,
    deltas_to_csv,
)
from .frame import Table, make_rng, train_test_split
from .ingest import load_dataset
from .interventions import apply_group_thresholds, disparate_impact_repair, fit_group_thresholds
from .learn import fit_logistic, predict_proba
from .manifest import CorpusRegistry, DatasetAnnotation, Scenario
from .transform import TransformConfig, transform_pipeline

DEFAULT_SEEDS = (80539, 80540, 80541, 80542, 80543)
DEFAULT_TIMEOUT = 300.0
RUN_HEADER = ("scenario_id", "method", "seed", "status", *METRICS, "error")


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


@dataclass(frozen=True)
class MethodContext:
    scenario_id: str
    seed: int
    rng: np.random.Generator


def design(table: Table) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature matrix, bool labels and group labels of a binarized table."""
    (sens,) = table.sensitive_names
    X = table.numeric_matrix(table.feature_names)
    y = table[table.target_name].values.astype(bool)
    group = np.array(table[sens].formatted(), dtype=object)
    return X, y, group


class Method:
    name = "method"

    def fit(self, train: Table, context: MethodContext) -> None:
        raise NotImplementedError

    def predict(self, test: Table) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError


class LogisticBaseline(Method):
    name = BASELINE

    def fit(self, train, context):
        X, y, _ = design(train)
        self.model = fit_logistic(X, y)

    def scores(self, table):
        X, _, _ = design(table)
        return predict_proba(self.model, X)

    def predict(self, test):
        s = self.scores(test)
        return s >= 0.5, s


class RepairThenLogistic(LogisticBaseline):
    """Full-strength feature repair applied to each split, then logistic regression."""

    name = "dir"

    def _repair(self, table):
        return disparate_impact_repair(table, table.sensitive_names[0], 1.0)

    def fit(self, train, context):
        super().fit(self._repair(train), context)

    def predict(self, test):
        return super().predict(self._repair(test))


class GroupThresholds(LogisticBaseline):
    objective = "eod"

    def fit(self, train, context):
        super().fit(train, context)
        _, y, group = design(train)
        self.thresholds = fit_group_thresholds(self.scores(train), group, y, self.objective)

    def predict(self, test):
        s = self.scores(test)
        _, _, group = design(test)
        return apply_group_thresholds(s, group, self.thresholds), s


class GroupThresholdsEOD(GroupThresholds):
    name = "group_thresholds_eod"
    objective = "eod"


class GroupThresholdsDPD(GroupThresholds):
    name = "group_thresholds_dpd"
    objective = "dpd"


METHODS: dict[str, Callable[[], Method]] = {}


def register_method(name: str, factory: Callable[[], Method]) -> None:
    METHODS[name] = factory


for _cls in (LogisticBaseline, RepairThenLogistic, GroupThresholdsEOD, GroupThresholdsDPD):
    register_method(_cls.name, _cls)


@dataclass(frozen=True)
class BenchmarkPlan:
    scenarios: Sequence[Scenario]
    methods: Sequence[str] = (BASELINE,)
    seeds: Sequence[int] = DEFAULT_SEEDS
    test_fraction: float = 0.3
    transform: TransformConfig = field(default_factory=TransformConfig.binarized)
    timeout: float | None = DEFAULT_TIMEOUT

    def __post_init__(self):
        if BASELINE not in self.methods:
            raise ValueError(f"plan must include the {BASELINE!r} method")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate method ids in plan")


@dataclass(frozen=True)
class RunRecord:
    scenario_id: str
    method: str
    seed: int
    status: str
    metrics: MetricSet | None = None
    wall_time: float = 0.0
    error: str = ""


def _run_with_timeout(fn, timeout):
    if timeout is None:
        return fn()
    pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
    try:
        return pool.submit(fn).result(timeout=timeout)
    finally:
        pool.shutdown(wait=False)


def _cell(method_id: str, train: Table, test: Table, context: MethodContext) -> MetricSet:
    method = METHODS[method_id]()
    method.fit(train, context)
    y_hat, scores = method.predict(test)
    _, y, group = design(test)
    return compute_metrics(GroupedPredictions(y, np.asarray(y_hat, dtype=bool), group, scores))


Loader = Callable[[DatasetAnnotation], Table]


def run_benchmark(
    plan: BenchmarkPlan,
    registry: CorpusRegistry,
    cache_dir=None,
    loader: Loader | None = None,
) -> tuple[list[RunRecord], list[DeltaRecord]]:
    """Evaluate every plan cell and compute deltas against the baseline.

    Per scenario the data are loaded and transformed once; per seed they are
    split once and shared by all methods, so deltas compare methods on
    identical train/test rows.  Method randomness comes from a generator
    seeded with (seed, scenario_id, method).
    """
    unknown = [m for m in plan.methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}")
    for s in plan.scenarios:
        registry.get(s.dataset_id)
    loader = loader or (lambda a: load_dataset(a, cache_dir))

    runs: list[RunRecord] = []
    for scenario in plan.scenarios:
        annotation = registry.get(scenario.dataset_id)
        prepared = None
        prep_error = ""
        try:
            raw = loader(annotation)
            prepared, _ = transform_pipeline(raw, annotation, scenario, plan.transform)
        except Exception as exc:  # noqa: BLE001 - recorded, never raised
            prep_error = f"{type(exc).__name__}: {exc}"
        for seed in plan.seeds:
            split_error = prep_error
            if prepared is not None:
                try:
                    train, test = train_test_split(prepared, plan.test_fraction, seed)
                except Exception as exc:  # noqa: BLE001
                    split_error = f"{type(exc).__name__}: {exc}"
            for method_id in plan.methods:
                if split_error:
                    runs.append(RunRecord(scenario.scenario_id, method_id, seed, "error", error=split_error))
                    continue
                context = MethodContext(
                    scenario.scenario_id,
                    seed,
                    make_rng([seed, stable_hash(scenario.scenario_id), stable_hash(method_id)]),
                )
                start = time.perf_counter()
                try:
                    metrics = _run_with_timeout(lambda: _cell(method_id, train, test, context), plan.timeout)
                    record = RunRecord(scenario.scenario_id, method_id, seed, "ok", metrics)
                except concurrent.futures.TimeoutError:
                    record = RunRecord(scenario.scenario_id, method_id, seed, "timeout", error=f"exceeded {plan.timeout}s")
                except Exception as exc:  # noqa: BLE001
                    record = RunRecord(scenario.scenario_id, method_id, seed, "error", error=f"{type(exc).__name__}: {exc}")
                runs.append(
                    RunRecord(record.scenario_id, record.method, record.seed, record.status, record.metrics,
                              time.perf_counter() - start, record.error)
                )
    return runs, delta_scores(score_records(runs))


def score_records(runs: Sequence[RunRecord]) -> list[ScoreRecord]:
    out = []
    for r in runs:
        for m in METRICS:
            score = getattr(r.metrics, m) if r.metrics is not None else None
            out.append(ScoreRecord(r.scenario_id, r.method, r.seed, m, score, r.status))
    return out


def runs_to_csv(runs: Sequence[RunRecord]) -> str:
    """Run records without wall time, so reruns produce identical bytes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_HEADER)
    for r in runs:
        scores = [("" if r.metrics is None or getattr(r.metrics, m) is None else repr(getattr(r.metrics, m))) for m in METRICS]
        writer.writerow([r.scenario_id, r.method, r.seed, r.status, *scores, r.error])
    return buf.getvalue()


def timings_to_csv(runs: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("scenario_id", "method", "seed", "wall_time"))
    for r in runs:
        writer.writerow([r.scenario_id, r.method, r.seed, f"{r.wall_time:.6f}"])
    return buf.getvalue()


def write_outputs(out_dir, runs: Sequence[RunRecord], deltas: Sequence[DeltaRecord]) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"runs": out / "runs.csv", "deltas": out / "deltas.csv", "timings": out / "timings.csv"}
    paths["runs"].write_text(runs_to_csv(runs), encoding="utf-8")
    paths["deltas"].write_text(deltas_to_csv(deltas), encoding="utf-8")
    paths["timings"].write_text(timings_to_csv(runs), encoding="utf-8")
    return paths


def plan_seeds(n: int) -> tuple[int, ...]:
    """First ``n`` seeds of the default sequence (extended past five by counting up)."""
    return tuple(DEFAULT_SEEDS[0] + i for i in range(n))


def resolve_scenarios(registry: CorpusRegistry, spec: str | Sequence[str] = "all") -> list[Scenario]:
    if spec == "all" or spec == ["all"]:
        return registry.scenarios()
    ids = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for sid in ids:
        sid = sid.strip()
        if "::" in sid:
            out.append(registry.find_scenario(sid))
        else:
            from .manifest import enumerate_scenarios

            out.extend(enumerate_scenarios(registry.get(sid)))
    return out


def scenario_meta(registry: CorpusRegistry) -> Mapping[str, dict]:
    return {
        s.scenario_id: {"dataset_id": a.dataset_id, "countries": a.countries}
        for a in registry
        for s in _safe_scenarios(a)
    }


def _safe_scenarios(annotation):
    from .manifest import enumerate_scenarios
    from .errors import NoSensitiveAttributesError

    try:
        return enumerate_scenarios(annotation)
    except NoSensitiveAttributesError:
        return []
