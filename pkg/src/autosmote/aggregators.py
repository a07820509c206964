"""The six ways of turning a seed and its neighbours into one synthetic row.

Single-row functions take ``x`` of shape ``(f,)`` and neighbours of shape
``(k, f)``. :func:`candidate_table` evaluates all six at once for a batch of
seeds and is what the learnable sampler uses.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class AggregatorKind(IntEnum):
    INTERPOLATION = 0
    MAXIMUM = 1
    MINIMUM = 2
    SUM = 3
    AVERAGE = 4
    WEIGHTED_AVERAGE = 5


def _check(x, neighbors):
    x = np.asarray(x, dtype=np.float64)
    neighbors = np.asarray(neighbors, dtype=np.float64)
    neighbors = np.atleast_2d(neighbors) if neighbors.size else np.empty((0, x.shape[-1]))
    if neighbors.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: seed has {x.shape[0]} features, "
                         f"neighbours have {neighbors.shape[1]}")
    return x, neighbors


def interpolate(x, x_star, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_star.shape}")
    return lam * x + (1.0 - lam) * x_star


def elementwise_max(x, neighbors) -> np.ndarray:
    x, neighbors = _check(x, neighbors)
    return np.vstack([x, neighbors]).max(axis=0)


def elementwise_min(x, neighbors) -> np.ndarray:
    x, neighbors = _check(x, neighbors)
    return np.vstack([x, neighbors]).min(axis=0)


def sum_agg(x, neighbors) -> np.ndarray:
    x, neighbors = _check(x, neighbors)
    return x + neighbors.sum(axis=0)


def average_agg(x, neighbors) -> np.ndarray:
    x, neighbors = _check(x, neighbors)
    return (x + neighbors.sum(axis=0)) / (len(neighbors) + 1)


def weighted_average(x, neighbors, weights) -> np.ndarray:
    """``sum(w * v) / sum(w)`` over ``[x] + neighbors``; ``weights[0]`` belongs to ``x``."""
    x, neighbors = _check(x, neighbors)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(neighbors) + 1,):
        raise ValueError("need exactly one weight per member of {x} and its neighbours")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    members = np.vstack([x, neighbors])
    return weights @ members / weights.sum()


def distance_weights(x, neighbors) -> np.ndarray:
    """Softmax of negative Euclidean distance to ``x``; the seed sits at distance 0."""
    x, neighbors = _check(x, neighbors)
    d = np.concatenate([[0.0], np.linalg.norm(neighbors - x, axis=1)])
    e = np.exp(-(d - d.min()))
    return e / e.sum()


def aggregate(kind: AggregatorKind, x, neighbors, rng: np.random.Generator | None = None,
              lam: float | None = None, partner: int | None = None) -> np.ndarray:
    """Dispatch on ``kind``. Interpolation draws its partner and weight from ``rng``
    unless they are supplied."""
    kind = AggregatorKind(kind)
    x, neighbors = _check(x, neighbors)
    if kind is AggregatorKind.INTERPOLATION:
        if len(neighbors) == 0:
            return x.copy()
        if partner is None:
            partner = int(rng.integers(len(neighbors)))
        if lam is None:
            lam = float(rng.random())
        return interpolate(x, neighbors[partner], lam)
    if kind is AggregatorKind.MAXIMUM:
        return elementwise_max(x, neighbors)
    if kind is AggregatorKind.MINIMUM:
        return elementwise_min(x, neighbors)
    if kind is AggregatorKind.SUM:
        return sum_agg(x, neighbors)
    if kind is AggregatorKind.AVERAGE:
        return average_agg(x, neighbors)
    return weighted_average(x, neighbors, distance_weights(x, neighbors))


def candidate_table(seeds: np.ndarray, neigh: np.ndarray, k: np.ndarray,
                    lam: np.ndarray, partner: np.ndarray) -> np.ndarray:
    """All six aggregations for a batch of seeds.

    Parameters
    ----------
    seeds : (S, f) seed rows.
    neigh : (S, K, f) neighbour rows, nearest first.
    k : (S,) neighbours actually used per seed, ``1 <= k <= K``.
    lam : (S,) interpolation weights on the seed.
    partner : (S,) interpolation partner position, ``< k``.

    Returns
    -------
    (S, 6, f) array ordered as :class:`AggregatorKind`.
    """
    S, K, f = neigh.shape
    active = (np.arange(K)[None, :] < k[:, None])[:, :, None]
    members_hi = np.where(active, neigh, -np.inf)
    members_lo = np.where(active, neigh, np.inf)
    masked = np.where(active, neigh, 0.0)

    out = np.empty((S, 6, f))
    rows = np.arange(S)
    out[:, AggregatorKind.INTERPOLATION] = lam[:, None] * seeds + (1.0 - lam[:, None]) * neigh[rows, partner]
    out[:, AggregatorKind.MAXIMUM] = np.maximum(seeds, members_hi.max(axis=1))
    out[:, AggregatorKind.MINIMUM] = np.minimum(seeds, members_lo.min(axis=1))
    summed = seeds + masked.sum(axis=1)
    out[:, AggregatorKind.SUM] = summed
    out[:, AggregatorKind.AVERAGE] = summed / (k[:, None] + 1.0)

    dist = np.sqrt(((neigh - seeds[:, None, :]) ** 2).sum(axis=2))
    logits = np.concatenate([np.zeros((S, 1)), np.where(active[:, :, 0], -dist, -np.inf)], axis=1)
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    out[:, AggregatorKind.WEIGHTED_AVERAGE] = w[:, :1] * seeds + np.einsum("sk,skf->sf", w[:, 1:], neigh)
    return out
