"""Tabular ingestion, preprocessing and stratified splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed input tables or invalid dataset operations."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels in ``[0, C)``.

    ``row_ids`` carries the row positions in the source table so that splits
    and augmentations stay traceable; synthetic rows get ``-1``.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DatasetError(f"shape mismatch: features {x.shape}, labels {y.shape}")
        if x.shape[1] != len(self.feature_names):
            raise DatasetError("feature_names length does not match feature width")
        if y.size and (y.min() < 0 or y.max() >= len(self.label_names)):
            raise DatasetError("label index out of range")
        ids = np.arange(len(y)) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        x.setflags(write=False)
        y.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "row_ids", ids)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def class_rows(self, c: int) -> np.ndarray:
        """Positions (not row ids) of the rows labelled ``c``."""
        return np.flatnonzero(self.labels == c)

    def subset(self, positions) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(self.features[positions], self.labels[positions],
                       self.feature_names, self.label_names, self.row_ids[positions])

    def with_features(self, features) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names, self.label_names, self.row_ids)

    def append(self, features, labels) -> "Dataset":
        """Return a copy with extra (synthetic) rows appended after the originals."""
        features = np.asarray(features, dtype=np.float64).reshape(-1, self.n_features)
        labels = np.asarray(labels, dtype=np.int64)
        return Dataset(np.vstack([self.features, features]),
                       np.concatenate([self.labels, labels]),
                       self.feature_names, self.label_names,
                       np.concatenate([self.row_ids, np.full(len(labels), -1)]))


@dataclass(frozen=True)
class NormStats:
    """Training-split statistics: fill value, minimum and maximum per feature."""

    mean: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        x = np.array(features, dtype=np.float64)
        missing = np.isnan(x)
        if missing.any():
            x[missing] = np.broadcast_to(self.mean, x.shape)[missing]
        span = self.maximum - self.minimum
        constant = span <= 0
        scaled = (x - self.minimum) / np.where(constant, 1.0, span)
        scaled[:, constant] = 0.0
        return np.clip(scaled, 0.0, 1.0)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    ratio: float


def load_csv(path, label_column: str) -> Dataset:
    """Read a headed CSV file; every non-label column must be numeric.

    Empty cells are kept as NaN for :func:`impute_and_normalize`. Label
    values are indexed in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    if label_column not in header:
        raise DatasetError(f"label column {label_column!r} not in header {header}")
    li = header.index(label_column)
    feature_cols = [i for i in range(len(header)) if i != li]

    x = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    label_index: dict[str, int] = {}
    y = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"row {r + 2} has {len(row)} cells, expected {len(header)}")
        lab = row[li].strip()
        y[r] = label_index.setdefault(lab, len(label_index))
        for j, col in enumerate(feature_cols):
            cell = row[col].strip()
            if cell == "" or cell == "?":
                x[r, j] = np.nan
                continue
            try:
                x[r, j] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"column {header[col]!r} is not numeric (row {r + 2}: {cell!r})") from None
    return Dataset(x, y, [header[i] for i in feature_cols], list(label_index))


def fit_norm_stats(d: Dataset) -> NormStats:
    x = d.features
    observed = ~np.isnan(x)
    n_obs = observed.sum(axis=0)
    # all-missing columns fall back to 0
    mean = np.where(n_obs > 0, np.where(observed, x, 0.0).sum(axis=0) / np.maximum(n_obs, 1), 0.0)
    filled = np.where(np.isnan(x), mean, x)
    return NormStats(mean, filled.min(axis=0), filled.max(axis=0))


def impute_and_normalize(d: Dataset, stats: NormStats | None = None) -> tuple[Dataset, NormStats]:
    """Mean-impute and min-max scale ``d``.

    Without ``stats`` the statistics are fitted on ``d`` itself, which must
    then be the training split. Values outside the fitted range are clamped.
    """
    if stats is None:
        stats = fit_norm_stats(d)
    return d.with_features(stats.apply(d.features)), stats


def stratified_split(d: Dataset, ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Per-class shuffle; the first ``ceil(ratio * count)`` rows go to train."""
    if not 0.0 < ratio < 1.0:
        raise DatasetError(f"ratio must lie in (0, 1), got {ratio}")
    counts = d.class_counts
    present = counts[counts > 0]
    if (present < 2).any():
        raise DatasetError("every class needs at least 2 instances to be split")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(d.n_classes):
        rows = d.class_rows(c)
        if rows.size == 0:
            continue
        rows = rows[rng.permutation(rows.size)]
        # 1e-9 guards float products like 0.8 * 20 against an off-by-one ceiling
        n_train = min(math.ceil(ratio * rows.size - 1e-9), rows.size - 1)
        train.append(rows[:n_train])
        test.append(rows[n_train:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    return SplitPair(d.subset(train), d.subset(test), seed, ratio)


def imbalance_ratio(d: Dataset) -> float:
    counts = d.class_counts
    if counts.size == 0 or counts.min() == 0:
        raise DatasetError("imbalance ratio undefined with an empty class")
    return float(counts.max() / counts.min())
