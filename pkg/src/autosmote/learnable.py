"""Learnable oversampling driven by three discrete decision criteria.

For every synthetic row the sampler decides

* DC1, participation: whether the seed contributes (soft probability is the
  row's loss weight during training),
* DC2, neighbour count: how many same-class neighbours to use (1..6),
* DC3, aggregation: which of the six aggregators combines seed and neighbours.

Decisions come from Gumbel-Softmax draws over logits produced either per
instance (``self`` variant) or per learned group (``cohort`` variant). The
whole graph is differentiable end to end, so the classifier loss trains the
decision parameters jointly with the classifier.

Gradient routing
----------------
DC1 enters as a soft gate on the row's loss weight. DC3 mixes all six
candidate outputs (computed at the hard neighbour count) with its soft
weights. DC2's choice changes the neighbour set discretely, so its value is
hard; its head is trained straight-through via the soft mixture of the hard
aggregator evaluated at each neighbour count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import gradcore as gc
from .aggregators import AggregatorKind, candidate_table
from .classifier import Mlp
from .dataset import Dataset
from .gumbel import GumbelSample, gumbel_softmax
from .neighbors import sorted_neighbors

log = logging.getLogger(__name__)

PARTICIPATION = (0, 1)
NEIGHBOR_COUNTS = (1, 2, 3, 4, 5, 6)
AGGREGATORS = tuple(AggregatorKind)
CRITERIA = ("dc1", "dc2", "dc3")
DECISION_SIZES = {"dc1": len(PARTICIPATION), "dc2": len(NEIGHBOR_COUNTS), "dc3": len(AGGREGATORS)}
K_MAX = max(NEIGHBOR_COUNTS)
HEAD_HIDDEN = 32


@dataclass
class SyntheticBatch:
    """Generated rows; ``weights`` is the participation weight of each row."""

    features: gc.Node
    labels: np.ndarray
    weights: gc.Node
    seeds: np.ndarray
    k: np.ndarray
    aggregator: np.ndarray
    candidates: np.ndarray


class NeighborTable:
    """Six nearest same-class training rows for every training row.

    Classes smaller than seven rows are padded by repeating the last real
    neighbour; ``available`` records how many are real.
    """

    def __init__(self, data: Dataset, k_max: int = K_MAX):
        n = data.n_rows
        self.lists = np.tile(np.arange(n)[:, None], (1, k_max))
        self.available = np.zeros(n, dtype=np.int64)
        for c in range(data.n_classes):
            rows = data.class_rows(c)
            if rows.size < 2:
                continue
            k = min(k_max, rows.size - 1)
            local = rows[sorted_neighbors(data.features[rows], k)]
            self.lists[rows, :k] = local
            self.lists[rows, k:] = local[:, -1:]
            self.available[rows] = k


def _fixed_k(k: int, available: np.ndarray) -> np.ndarray:
    return np.minimum(k, available)


class DecisionSampler:
    """Shared machinery of the ``self`` and ``cohort`` variants.

    Subclasses implement :meth:`criterion_logits`.
    """

    variant = "base"

    def __init__(self, data: Dataset, rng: np.random.Generator, tau: float = 1.0,
                 ablate=(), k: int = 3):
        unknown = set(ablate) - set(CRITERIA)
        if unknown:
            raise ValueError(f"unknown criteria to ablate: {sorted(unknown)}")
        if not 1 <= k <= K_MAX:
            raise ValueError(f"fixed neighbour count must lie in [1, {K_MAX}]")
        self.data = data
        self.tau = tau
        self.ablate = frozenset(ablate)
        self.k = k
        self.table = NeighborTable(data)
        self._warned: set[int] = set()

    @property
    def active(self) -> tuple[str, ...]:
        return tuple(c for c in CRITERIA if c not in self.ablate)

    @property
    def params(self) -> list[gc.Node]:
        raise NotImplementedError

    def n_params(self) -> int:
        return sum(p.value.size for p in self.params)

    def criterion_logits(self, x: np.ndarray, rng) -> dict[str, gc.Node]:
        raise NotImplementedError

    def decide(self, x: np.ndarray, rng: np.random.Generator) -> dict[str, GumbelSample]:
        """One Gumbel-Softmax draw per active criterion for each row of ``x``."""
        logits = self.criterion_logits(x, rng)
        return {c: gumbel_softmax(logits[c], self.tau, rng) for c in self.active}

    def seeds_for(self, positions: np.ndarray) -> np.ndarray:
        """Seed positions that bring every class in ``positions`` up to the largest count."""
        labels = self.data.labels[positions]
        counts = np.bincount(labels, minlength=self.data.n_classes)
        top = counts.max()
        seeds = []
        for c in np.flatnonzero((counts > 0) & (counts < top)):
            members = positions[labels == c]
            if members.size < 2 or self.table.available[members[0]] == 0:
                if c not in self._warned:
                    log.warning("class %d has a single member in the batch; not oversampled", c)
                    self._warned.add(c)
                continue
            seeds.append(np.resize(members, top - counts[c]))
        return np.concatenate(seeds) if seeds else np.empty(0, dtype=np.int64)

    def generate(self, seeds: np.ndarray, rng: np.random.Generator) -> SyntheticBatch:
        """Differentiable synthetic rows for ``seeds`` (training-time path)."""
        x = self.data.features[seeds]
        S = len(seeds)
        avail = self.table.available[seeds]
        neigh = self.data.features[self.table.lists[seeds]]
        draws = self.decide(x, rng)

        if "dc2" in draws:
            k = np.minimum(np.asarray(NEIGHBOR_COUNTS)[draws["dc2"].hard_index], avail)
        else:
            k = _fixed_k(self.k, avail)
        if "dc3" in draws:
            agg = draws["dc3"].hard_index
        else:
            agg = np.full(S, int(AggregatorKind.INTERPOLATION))

        lam = rng.random(S)
        u = rng.random(S)
        cand = candidate_table(x, neigh, k, lam, np.floor(u * k).astype(np.int64))
        if "dc3" in draws:
            out = gc.mix(draws["dc3"].soft, cand)
        else:
            out = gc.constant(cand[np.arange(S), agg])

        if "dc2" in draws:
            per_k = np.empty((S, len(NEIGHBOR_COUNTS), x.shape[1]))
            for j, kk in enumerate(NEIGHBOR_COUNTS):
                kj = np.minimum(kk, avail)
                tab = candidate_table(x, neigh, kj, lam, np.floor(u * kj).astype(np.int64))
                per_k[:, j] = tab[np.arange(S), agg]
            out = gc.straight_through(out, gc.mix(draws["dc2"].soft, per_k))

        if "dc1" in draws:
            weights = gc.take_cols(draws["dc1"].soft, [1])
        else:
            weights = gc.constant(np.ones((S, 1)))
        return SyntheticBatch(out, self.data.labels[seeds], weights, seeds, k, agg, cand)

    def augment(self, positions: np.ndarray, rng: np.random.Generator):
        """Batch rows followed by weighted synthetic rows, as graph nodes."""
        positions = np.asarray(positions)
        real = gc.constant(self.data.features[positions])
        labels = self.data.labels[positions]
        seeds = self.seeds_for(positions)
        if seeds.size == 0:
            return real, labels, None
        syn = self.generate(seeds, rng)
        return (gc.concat_rows(real, syn.features),
                np.concatenate([labels, syn.labels]),
                gc.concat_rows(gc.constant(np.ones((len(positions), 1))), syn.weights))

    def sample(self, rng: np.random.Generator, positions: np.ndarray | None = None) -> Dataset:
        """Inference-time oversampling with hard decisions only.

        Seeds whose participation decision is 0 generate nothing, so the
        result may stay short of balance.
        """
        if positions is None:
            positions = np.arange(self.data.n_rows)
        seeds = self.seeds_for(np.asarray(positions))
        if seeds.size == 0:
            return self.data.subset(positions)
        x = self.data.features[seeds]
        S = len(seeds)
        avail = self.table.available[seeds]
        neigh = self.data.features[self.table.lists[seeds]]
        draws = self.decide(x, rng)
        keep = draws["dc1"].hard_index == 1 if "dc1" in draws else np.ones(S, dtype=bool)
        if "dc2" in draws:
            k = np.minimum(np.asarray(NEIGHBOR_COUNTS)[draws["dc2"].hard_index], avail)
        else:
            k = _fixed_k(self.k, avail)
        agg = draws["dc3"].hard_index if "dc3" in draws else np.zeros(S, dtype=np.int64)
        cand = candidate_table(x, neigh, k, rng.random(S), np.floor(rng.random(S) * k).astype(np.int64))
        rows = cand[np.arange(S), agg][keep]
        return self.data.subset(positions).append(rows, self.data.labels[seeds][keep])


class SelfSampler(DecisionSampler):
    """One small MLP per criterion maps each seed row to that criterion's logits."""

    variant = "self"

    def __init__(self, data: Dataset, rng: np.random.Generator, tau: float = 1.0,
                 ablate=(), k: int = 3, hidden: int = HEAD_HIDDEN):
        super().__init__(data, rng, tau, ablate, k)
        self.heads = {c: Mlp(data.n_features, hidden, DECISION_SIZES[c], rng,
                             prefix=f"self.{c}", softmax=False)
                      for c in self.active}

    @property
    def params(self):
        return [p for head in self.heads.values() for p in head.params]

    def criterion_logits(self, x, rng):
        return {c: head.forward(x) for c, head in self.heads.items()}


class CohortSampler(DecisionSampler):
    """Seeds are assigned to one of ``groups`` learned groups; each group owns a
    row of logits per criterion.

    The hard group picks the logit row; the soft group weights carry the
    gradient back to the assigner (straight-through).
    """

    variant = "cohort"

    def __init__(self, data: Dataset, rng: np.random.Generator, tau: float = 1.0,
                 ablate=(), k: int = 3, groups: int = 3, hidden: int = HEAD_HIDDEN):
        if not 1 <= groups <= 7:
            raise ValueError("group count must lie in [1, 7]")
        super().__init__(data, rng, tau, ablate, k)
        self.groups = groups
        self.assigner = Mlp(data.n_features, hidden, groups, rng, prefix="cohort.assigner",
                            softmax=False)
        self.tables = {c: gc.parameter(rng.normal(0.0, 0.1, size=(groups, DECISION_SIZES[c])),
                                       f"cohort.{c}.table")
                       for c in self.active}

    @property
    def params(self):
        return list(self.assigner.params) + list(self.tables.values())

    def assign(self, x, rng) -> GumbelSample:
        return gumbel_softmax(self.assigner.forward(x), self.tau, rng)

    def criterion_logits(self, x, rng):
        group = self.assign(x, rng)
        routed = gc.straight_through(gc.constant(group.one_hot()), group.soft)
        return {c: gc.matmul(routed, table) for c, table in self.tables.items()}


class DirectMlpSampler:
    """Unconstrained baseline: a synthetic row is ``x + net(x)`` for a seed ``x``.

    The residual output layer starts at zero, so synthetic rows begin as
    copies of their seeds.
    """

    variant = "mlp"

    def __init__(self, data: Dataset, rng: np.random.Generator, hidden: int = 128):
        self.data = data
        self.net = Mlp(data.n_features, hidden, data.n_features, rng, prefix="direct", softmax=False)
        self.net.w2.value = np.zeros_like(self.net.w2.value)
        self.table = NeighborTable(data)
        self._warned: set[int] = set()

    @property
    def params(self):
        return self.net.params

    def n_params(self) -> int:
        return self.net.n_params()

    seeds_for = DecisionSampler.seeds_for

    def generate(self, seeds: np.ndarray) -> gc.Node:
        x = gc.constant(self.data.features[seeds])
        return gc.add(x, self.net.forward(x))

    def augment(self, positions: np.ndarray, rng: np.random.Generator):
        positions = np.asarray(positions)
        real = gc.constant(self.data.features[positions])
        labels = self.data.labels[positions]
        seeds = self.seeds_for(positions)
        if seeds.size == 0:
            return real, labels, None
        return (gc.concat_rows(real, self.generate(seeds)),
                np.concatenate([labels, self.data.labels[seeds]]), None)


def ablate(variant: str, data: Dataset, rng: np.random.Generator, which=(), **kwargs):
    """Build a learnable sampler with the criteria in ``which`` switched off.

    Without DC1 every synthetic row has weight 1; without DC2 the neighbour
    count is the fixed ``k``; without DC3 rows are interpolated.
    """
    if variant == "self":
        return SelfSampler(data, rng, ablate=which, **kwargs)
    if variant == "cohort":
        return CohortSampler(data, rng, ablate=which, **kwargs)
    raise ValueError(f"unknown variant {variant!r}")


def self_head_param_count(f: int, hidden: int = HEAD_HIDDEN) -> int:
    return sum(f * hidden + hidden + hidden * n + n for n in DECISION_SIZES.values())


def cohort_param_count(f: int, groups: int, hidden: int = HEAD_HIDDEN) -> int:
    return f * hidden + hidden + hidden * groups + groups + groups * sum(DECISION_SIZES.values())


def direct_param_count(f: int, hidden: int = 128) -> int:
    return 2 * f * hidden + hidden + f
