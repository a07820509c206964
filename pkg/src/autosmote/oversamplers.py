"""Fixed (non-learnable) oversamplers used as baselines.

Every sampler returns the input rows unchanged followed by the synthetic
rows, and hits the plan's per-class targets exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .aggregators import interpolate
from .dataset import Dataset
from .neighbors import build_index

log = logging.getLogger(__name__)


class OversamplingError(RuntimeError):
    """The sampler cannot run on this data (e.g. a minority class is too small)."""


@dataclass(frozen=True)
class OversamplePlan:
    targets: tuple[int, ...]
    seed: int = 0

    @classmethod
    def balance(cls, d: Dataset, seed: int = 0) -> "OversamplePlan":
        counts = d.class_counts
        return cls(tuple(int(counts.max()) if c > 0 else 0 for c in counts), seed)

    def deficits(self, d: Dataset) -> np.ndarray:
        counts = d.class_counts
        targets = np.asarray(self.targets)
        if targets.shape != counts.shape:
            raise ValueError("plan has a different number of classes than the dataset")
        if np.any(targets < counts):
            raise ValueError("plan targets must not be below current class counts")
        return targets - counts


def _plan(d, plan, seed):
    return OversamplePlan.balance(d, seed) if plan is None else plan


def random_oversample(d: Dataset, plan: OversamplePlan | None = None) -> Dataset:
    plan = _plan(d, plan, 0)
    rng = np.random.default_rng(plan.seed)
    new_x, new_y = [], []
    for c, need in enumerate(plan.deficits(d)):
        if need == 0:
            continue
        rows = d.class_rows(c)
        picks = rows[rng.integers(rows.size, size=need)]
        new_x.append(d.features[picks])
        new_y.append(np.full(need, c))
    return _augment(d, new_x, new_y)


def _augment(d, new_x, new_y):
    if not new_x:
        return d
    return d.append(np.vstack(new_x), np.concatenate(new_y))


def _interpolate_from(d, seeds, index, k, rng):
    """One synthetic row per entry of ``seeds`` toward a random one of its k neighbours."""
    out = np.empty((len(seeds), d.n_features))
    for i, s in enumerate(seeds):
        neigh = index.lists[index.slot(s), :k]
        partner = neigh[rng.integers(neigh.size)]
        out[i] = interpolate(d.features[s], d.features[partner], rng.random())
    return out


def _round_robin(seeds: np.ndarray, n: int) -> np.ndarray:
    return np.resize(seeds, n) if n else np.empty(0, dtype=np.int64)


def smote(d: Dataset, plan: OversamplePlan | None = None, k: int = 5) -> Dataset:
    """Interpolate between each minority row and a random same-class neighbour.

    Seeds are taken round-robin over the class rows so every row is used
    before any is reused.
    """
    plan = _plan(d, plan, 0)
    rng = np.random.default_rng(plan.seed)
    new_x, new_y = [], []
    for c, need in enumerate(plan.deficits(d)):
        if need == 0:
            continue
        index = build_index(d, c, k)
        seeds = _round_robin(index.rows, need)
        new_x.append(_interpolate_from(d, seeds, index, k, rng))
        new_y.append(np.full(need, c))
    return _augment(d, new_x, new_y)


def _other_class_fraction(d: Dataset, rows: np.ndarray, label: int, k: int) -> np.ndarray:
    """Fraction of each row's k nearest neighbours (any class) with a different label."""
    k = min(k, d.n_rows - 1)
    d2 = ((d.features[rows][:, None, :] - d.features[None, :, :]) ** 2).sum(axis=2)
    d2[np.arange(rows.size), rows] = np.inf
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return (d.labels[nn] != label).mean(axis=1)


def borderline_states(d: Dataset, label: int, k: int) -> np.ndarray:
    """``'danger'``, ``'noise'`` or ``'safe'`` for each row of class ``label``."""
    frac = _other_class_fraction(d, d.class_rows(label), label, k)
    states = np.full(frac.shape, "safe", dtype=object)
    states[(frac >= 0.5) & (frac < 1.0)] = "danger"
    states[frac == 1.0] = "noise"
    return states


def borderline_seeds(d: Dataset, label: int, k: int) -> np.ndarray:
    """Danger rows of class ``label``, or all its rows when there are none."""
    rows = d.class_rows(label)
    danger = rows[borderline_states(d, label, k) == "danger"]
    if danger.size == 0:
        log.warning("class %d has no borderline (danger) rows; falling back to SMOTE", label)
        return rows
    return danger


def borderline_smote(d: Dataset, plan: OversamplePlan | None = None, k: int = 5) -> Dataset:
    """Borderline-1: only danger rows seed, partners are same-class neighbours."""
    plan = _plan(d, plan, 0)
    rng = np.random.default_rng(plan.seed)
    new_x, new_y = [], []
    for c, need in enumerate(plan.deficits(d)):
        if need == 0:
            continue
        index = build_index(d, c, k)
        seeds = _round_robin(borderline_seeds(d, c, k), need)
        new_x.append(_interpolate_from(d, seeds, index, k, rng))
        new_y.append(np.full(need, c))
    return _augment(d, new_x, new_y)


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights`` summing exactly to ``total``."""
    weights = np.asarray(weights, dtype=np.float64)
    quota = weights / weights.sum() * total
    counts = np.floor(quota).astype(np.int64)
    short = total - counts.sum()
    if short:
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def adasyn_allocation(d: Dataset, label: int, k: int, total: int) -> np.ndarray:
    r = _other_class_fraction(d, d.class_rows(label), label, k)
    if r.sum() == 0:
        log.warning("class %d: no row has other-class neighbours; allocating uniformly", label)
        r = np.ones_like(r)
    return largest_remainder(r, total)


def adasyn(d: Dataset, plan: OversamplePlan | None = None, k: int = 5) -> Dataset:
    """Allocate synthetic rows in proportion to each row's other-class neighbour share.

    Unlike :func:`smote` this refuses classes with fewer than ``k + 1``
    members, since the difficulty ratio needs full neighbourhoods.
    """
    plan = _plan(d, plan, 0)
    rng = np.random.default_rng(plan.seed)
    new_x, new_y = [], []
    for c, need in enumerate(plan.deficits(d)):
        if need == 0:
            continue
        rows = d.class_rows(c)
        if rows.size < k + 1:
            raise OversamplingError(
                f"ADASYN: class {c} has {rows.size} rows, needs at least {k + 1} for k={k}")
        index = build_index(d, c, k)
        seeds = np.repeat(rows, adasyn_allocation(d, c, k, need))
        new_x.append(_interpolate_from(d, seeds, index, k, rng))
        new_y.append(np.full(need, c))
    return _augment(d, new_x, new_y)


CLASSIC = {
    "random": lambda d, plan, k: random_oversample(d, plan),
    "smote": smote,
    "borderline": borderline_smote,
    "adasyn": adasyn,
}
