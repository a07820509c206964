"""Exact same-class nearest neighbours under the Euclidean metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, DatasetError


def pairwise_sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def sorted_neighbors(points: np.ndarray, k: int, candidates: np.ndarray | None = None) -> np.ndarray:
    """Indices of the ``k`` nearest rows of ``candidates`` for each row of ``points``.

    With ``candidates`` omitted the search is within ``points`` and excludes
    self. Ties go to the lower index (stable sort).
    """
    own = candidates is None
    cand = points if own else candidates
    d = pairwise_sq_distances(points, cand)
    if own:
        np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    return order[:, :k]


@dataclass(frozen=True)
class NeighborIndex:
    """Per-row neighbour lists for one class of a dataset.

    ``rows`` are dataset positions of the indexed class members;
    ``lists[i]`` holds dataset positions of the nearest same-class rows of
    ``rows[i]``, closest first.
    """

    label: int
    k_max: int
    rows: np.ndarray
    lists: np.ndarray
    _slot: dict

    @property
    def available(self) -> int:
        return self.lists.shape[1]

    def slot(self, row: int) -> int:
        try:
            return self._slot[int(row)]
        except KeyError:
            raise KeyError(f"row {row} is not indexed for class {self.label}") from None

    def neighbors_of(self, row: int, k: int) -> list[int]:
        """First ``k`` neighbours of ``row``; fewer when the class is too small."""
        if not 1 <= k <= self.k_max:
            raise ValueError(f"k must lie in [1, {self.k_max}], got {k}")
        return self.lists[self.slot(row), :k].tolist()

    def truncated(self, k: int) -> bool:
        return k > self.available


def build_index(d: Dataset, label: int, k_max: int = 6) -> NeighborIndex:
    if k_max < 1:
        raise ValueError("k_max must be positive")
    rows = d.class_rows(label)
    if rows.size < 2:
        raise DatasetError(f"class {label} has {rows.size} instance(s); need at least 2")
    k = min(k_max, rows.size - 1)
    local = sorted_neighbors(d.features[rows], k)
    return NeighborIndex(label, k_max, rows, rows[local], {int(r): i for i, r in enumerate(rows)})
