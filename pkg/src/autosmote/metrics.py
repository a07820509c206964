"""Per-class and macro precision / recall / F1, and cross-method rank tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricsReport:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())

    def as_dict(self) -> dict:
        return {
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
            "accuracy": self.accuracy,
            "per_class": {
                "tp": self.tp.tolist(), "fp": self.fp.tolist(), "fn": self.fn.tolist(),
                "precision": self.precision.tolist(), "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
            },
        }


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den > 0)


def compute(preds, truth, n_classes: int | None = None) -> MetricsReport:
    """One-vs-rest counts per class; zero denominators give 0, never NaN."""
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if n_classes is None:
        n_classes = int(max(preds.max(initial=-1), truth.max(initial=-1))) + 1
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    tp = np.diag(cm).copy()
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    accuracy = float(tp.sum() / len(truth)) if len(truth) else 0.0
    return MetricsReport(tp, fp, fn, precision, recall, f1, accuracy)


METRIC_NAMES = ("precision", "recall", "f1")


def average_rank(results: dict) -> dict:
    """Average rank per method and metric across datasets (1 = best).

    ``results[method][dataset][metric]`` holds a score (higher is better) or
    ``None`` for a failed cell; failed cells share the worst ranks. Ties get
    the mean of the ranks they span. The overall rank is the mean of the
    per-metric average ranks.
    """
    methods = list(results)
    if not methods:
        raise ValueError("empty results table")
    datasets = sorted({ds for m in methods for ds in results[m]})
    if not datasets:
        raise ValueError("results table has no datasets")
    per_dataset = {m: {metric: [] for metric in METRIC_NAMES} for m in methods}
    for ds in datasets:
        for metric in METRIC_NAMES:
            scores = []
            for m in methods:
                cell = results[m].get(ds)
                v = None if cell is None else cell.get(metric)
                scores.append(-np.inf if v is None else float(v))
            ranks = rankdata(-np.asarray(scores), method="average")
            for m, r in zip(methods, ranks):
                per_dataset[m][metric].append(float(r))
    table = {}
    for m in methods:
        row = {metric: float(np.mean(per_dataset[m][metric])) for metric in METRIC_NAMES}
        row["overall"] = float(np.mean([row[metric] for metric in METRIC_NAMES]))
        row["per_dataset"] = {metric: dict(zip(datasets, per_dataset[m][metric]))
                              for metric in METRIC_NAMES}
        table[m] = row
    return table
