"""PNG figures written next to the delimited outputs of ``bench`` and ``select``.

Figures are built on ``matplotlib.figure.Figure`` directly (Agg canvas), so no
global pyplot state or display backend is involved.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .fairness import BASELINE, METRICS, DeltaRecord  # noqa: E402
from .select import Collection  # noqa: E402

NEGLIGIBLE = 0.01
METRIC_TITLES = {"bacc": "balanced accuracy", "f1": "F1", "eod": "equalized odds diff.", "dpd": "demographic parity diff."}


def plot_delta_histogram(deltas: Sequence[DeltaRecord], path, bins: int = 30) -> Path:
    """One panel per metric: histogram of non-baseline deltas, with the
    near-zero band |delta| <= 0.01 shaded."""
    fig = Figure(figsize=(9, 6.5), layout="constrained")
    axes = fig.subplots(2, 2)
    for ax, metric in zip(axes.ravel(), METRICS):
        values = [r.delta for r in deltas if r.metric == metric and r.method != BASELINE and r.delta is not None]
        ax.axvspan(-NEGLIGIBLE, NEGLIGIBLE, color="0.85", zorder=0)
        if values:
            ax.hist(values, bins=bins, color="tab:blue", edgecolor="white")
            small = sum(abs(v) <= NEGLIGIBLE for v in values) / len(values)
            ax.set_title(f"{METRIC_TITLES[metric]} ({small:.0%} within ±{NEGLIGIBLE})", fontsize=10)
        else:
            ax.text(0.5, 0.5, "no defined deltas", ha="center", va="center", transform=ax.transAxes)
            ax.set_title(METRIC_TITLES[metric], fontsize=10)
        ax.axvline(0.0, color="black", linewidth=0.8)
        ax.set_xlabel("delta vs. baseline")
        ax.set_ylabel("runs")
    path = Path(path)
    fig.savefig(path, dpi=100)
    return path


def plot_insertion_correlations(collection: Collection, path) -> Path:
    """Average correlation of each entry at the time it joined the collection."""
    entries = collection.entries
    fig = Figure(figsize=(max(5.0, 0.6 * len(entries) + 2), 4), layout="constrained")
    ax = fig.subplots()
    xs = range(len(entries))
    ax.plot(xs, [e.avg_correlation_at_insertion for e in entries], marker="o", color="tab:orange")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([e.scenario_id for e in entries], rotation=45, ha="right", fontsize=8)
    tau = collection.constraints_used.tau
    if tau is not None:
        ax.axhline(tau, linestyle="--", color="0.4", label=f"tau = {tau:g}")
        ax.legend(loc="best")
    ax.set_ylim(-1.05, 1.05)
    ax.set_ylabel("mean Spearman correlation at insertion")
    ax.set_xlabel("insertion order")
    path = Path(path)
    fig.savefig(path, dpi=100)
    return path
