"""Performance/fairness metrics and delta scores against a baseline.

Metrics return ``None`` where they are undefined (e.g. balanced accuracy on
a test set holding a single label class).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

METRICS = ("bacc", "f1", "eod", "dpd")
BASELINE = "baseline"
DELTA_HEADER = ("scenario_id", "method", "seed", "metric", "score", "baseline_score", "delta", "status")


@dataclass(frozen=True, eq=False)
class GroupedPredictions:
    y: np.ndarray
    y_hat: np.ndarray
    group: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y).astype(bool)
        y_hat = np.asarray(self.y_hat).astype(bool)
        group = np.asarray(self.group)
        if not (len(y) == len(y_hat) == len(group)):
            raise ValueError("y, y_hat and group must have equal length")
        if self.scores is not None and len(self.scores) != len(y):
            raise ValueError("scores must match y in length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "group", group)

    def groups(self) -> list:
        return sorted(set(self.group.tolist()))


@dataclass(frozen=True)
class MetricSet:
    bacc: float | None
    f1: float | None
    eod: float | None
    dpd: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {m: getattr(self, m) for m in METRICS}


def balanced_accuracy(gp: GroupedPredictions) -> float | None:
    pos, neg = gp.y, ~gp.y
    if not pos.any() or not neg.any():
        return None
    recall = (gp.y_hat & pos).sum() / pos.sum()
    specificity = (~gp.y_hat & neg).sum() / neg.sum()
    return float((specificity + recall) / 2)


def f1_score(gp: GroupedPredictions) -> float | None:
    """Harmonic mean of precision and recall; 0 when nothing positive is predicted."""
    if not gp.y.any():
        return None
    tp = int((gp.y & gp.y_hat).sum())
    fp = int((~gp.y & gp.y_hat).sum())
    fn = int((gp.y & ~gp.y_hat).sum())
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def equalized_odds_difference(gp: GroupedPredictions) -> float | None:
    """Spread of true-positive rates across groups that contain positives."""
    rates = []
    for g in gp.groups():
        in_g = (gp.group == g) & gp.y
        if in_g.any():
            rates.append(gp.y_hat[in_g].sum() / in_g.sum())
    if not rates:
        return None
    return float(max(rates) - min(rates))


def demographic_parity_difference(gp: GroupedPredictions) -> float | None:
    rates = [gp.y_hat[gp.group == g].mean() for g in gp.groups()]
    if not rates:
        return None
    return float(max(rates) - min(rates))


def compute_metrics(gp: GroupedPredictions) -> MetricSet:
    return MetricSet(
        bacc=balanced_accuracy(gp),
        f1=f1_score(gp),
        eod=equalized_odds_difference(gp),
        dpd=demographic_parity_difference(gp),
    )


# --- delta scores ---------------------------------------------------------

@dataclass(frozen=True)
class ScoreRecord:
    scenario_id: str
    method: str
    seed: int
    metric: str
    score: float | None
    status: str = "ok"


@dataclass(frozen=True)
class DeltaRecord:
    scenario_id: str
    method: str
    seed: int
    metric: str
    score: float | None
    baseline_score: float | None
    delta: float | None
    status: str = "ok"


def delta_scores(records: Iterable[ScoreRecord | Sequence], baseline: str = BASELINE) -> list[DeltaRecord]:
    """Subtract the baseline score of the same (scenario, seed, metric).

    Problems never abort the computation; they surface in ``status``:
    ``missing_baseline``, ``baseline_<status>`` for a failed baseline run,
    the run's own status for failed runs, and ``undefined`` when either
    score is undefined.
    """
    recs = [r if isinstance(r, ScoreRecord) else ScoreRecord(*r) for r in records]
    base = {(r.scenario_id, r.seed, r.metric): r for r in recs if r.method == baseline}
    out = []
    for r in recs:
        b = base.get((r.scenario_id, r.seed, r.metric))
        b_score = b.score if b is not None and b.status == "ok" else None
        if r.status != "ok":
            status, score = r.status, None
        elif b is None:
            status, score = "missing_baseline", r.score
        elif b.status != "ok":
            status, score = f"baseline_{b.status}", r.score
        elif r.score is None or b.score is None:
            status, score = "undefined", r.score
        else:
            status, score = "ok", r.score
        delta = score - b_score if status == "ok" else None
        out.append(DeltaRecord(r.scenario_id, r.method, r.seed, r.metric, score, b_score, delta, status))
    return out


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def deltas_to_csv(records: Iterable[DeltaRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DELTA_HEADER)
    for r in records:
        writer.writerow(
            [r.scenario_id, r.method, r.seed, r.metric, _fmt(r.score), _fmt(r.baseline_score), _fmt(r.delta), r.status]
        )
    return buf.getvalue()


def deltas_from_csv(text: str) -> list[DeltaRecord]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(DELTA_HEADER) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"delta CSV lacks columns {sorted(missing)}")

    def num(s):
        return None if s == "" else float(s)

    return [
        DeltaRecord(
            row["scenario_id"], row["method"], int(row["seed"]), row["metric"],
            num(row["score"]), num(row["baseline_score"]), num(row["delta"]), row["status"] or "ok",
        )
        for row in reader
    ]

