"""One-hidden-layer MLP classifier and its mini-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import gradcore as gc
from .dataset import Dataset

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 500
    seed: int = 0
    tau: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.tau <= 0:
            raise ValueError("learning rate and temperature must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive integers")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Mlp:
    """``softmax(relu(x W1 + b1) W2 + b2)`` when ``softmax`` is set, raw output otherwise."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator,
                 prefix: str = "mlp", softmax: bool = True):
        self.n_in, self.n_hidden, self.n_out = n_in, n_hidden, n_out
        self.softmax = softmax
        self.w1 = gc.parameter(glorot(rng, n_in, n_hidden), f"{prefix}.w1")
        self.b1 = gc.parameter(np.zeros((1, n_hidden)), f"{prefix}.b1")
        self.w2 = gc.parameter(glorot(rng, n_hidden, n_out), f"{prefix}.w2")
        self.b2 = gc.parameter(np.zeros((1, n_out)), f"{prefix}.b2")

    @property
    def params(self) -> list[gc.Node]:
        return [self.w1, self.b1, self.w2, self.b2]

    def n_params(self) -> int:
        return sum(p.value.size for p in self.params)

    def logits(self, x) -> gc.Node:
        x = gc.constant(x)
        if x.shape[1] != self.n_in:
            raise gc.ShapeError(f"input width {x.shape[1]} != {self.n_in}")
        h = gc.relu(gc.add(gc.matmul(x, self.w1), self.b1))
        return gc.add(gc.matmul(h, self.w2), self.b2)

    def forward(self, x) -> gc.Node:
        z = self.logits(x)
        return gc.softmax_rows(z) if self.softmax else z


class MlpClassifier(Mlp):
    def __init__(self, n_features: int, n_classes: int, rng: np.random.Generator, hidden: int = 64):
        super().__init__(n_features, hidden, n_classes, rng, prefix="classifier")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).value

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax keeps the lowest index on ties
        return np.argmax(self.predict_proba(x), axis=1)


def cross_entropy(probs, labels, weights=None) -> gc.Node:
    """Mean negative log-likelihood of ``labels``; with ``weights`` (an ``(n, 1)``
    node or array) the weighted mean ``sum(w * nll) / sum(w)``."""
    nll = gc.scalar_mul(gc.log(gc.clip_min(gc.pick(probs, labels), PROB_FLOOR)), -1.0)
    if weights is None:
        return gc.mean(nll)
    weights = gc.constant(weights)
    return gc.divide(gc.total(gc.hadamard(weights, nll)), gc.total(weights))


class BatchSampler(Protocol):
    """Hook that augments a training batch inside the differentiable graph."""

    params: list

    def augment(self, positions: np.ndarray, rng: np.random.Generator):
        """Return ``(features node, labels, weights node or None)`` for the batch."""


@dataclass
class EpochStats:
    loss: float
    error: float
    n_rows: int


@dataclass
class Trainer:
    """Owns the classifier, the optional batch sampler and a shared Adam state."""

    model: MlpClassifier
    data: Dataset
    cfg: TrainConfig
    sampler: BatchSampler | None = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        params = list(self.model.params)
        if self.sampler is not None:
            params += list(self.sampler.params)
        self.optimizer = gc.Adam(params, lr=self.cfg.learning_rate)
        self.rng = np.random.default_rng([self.cfg.seed, 1])

    def train_epoch(self) -> EpochStats:
        n = self.data.n_rows
        if n == 0:
            raise ValueError("cannot train on an empty dataset")
        order = self.rng.permutation(n)
        loss_sum, errors, rows = 0.0, 0, 0
        for start in range(0, n, self.cfg.batch_size):
            batch = order[start:start + self.cfg.batch_size]
            if self.sampler is None:
                x, y, w = gc.constant(self.data.features[batch]), self.data.labels[batch], None
            else:
                x, y, w = self.sampler.augment(batch, self.rng)
            probs = self.model.forward(x)
            loss = cross_entropy(probs, y, w)
            gc.backward(loss)
            self.optimizer.step()
            m = len(y)
            loss_sum += float(loss.value[0, 0]) * m
            errors += int((np.argmax(probs.value, axis=1) != y).sum())
            rows += m
        stats = EpochStats(loss_sum / rows, errors / rows, rows)
        self.history.append(stats)
        return stats

    def fit(self, callback=None) -> list[EpochStats]:
        for epoch in range(self.cfg.epochs):
            stats = self.train_epoch()
            if callback is not None:
                callback(epoch, stats)
        return self.history


def save_weights(path, named: dict[str, np.ndarray]) -> None:
    np.savez(Path(path), **{k: np.asarray(v) for k, v in named.items()})


def load_weights(path) -> dict[str, np.ndarray]:
    with np.load(Path(path)) as data:
        return {k: data[k].copy() for k in data.files}


def named_params(*modules) -> dict[str, np.ndarray]:
    out = {}
    for module in modules:
        for p in module.params:
            out[p.name] = p.value
    return out


def assign_params(named: dict[str, np.ndarray], *modules) -> None:
    for module in modules:
        for p in module.params:
            if p.name not in named:
                raise KeyError(f"checkpoint lacks {p.name}")
            if named[p.name].shape != p.value.shape:
                raise gc.ShapeError(f"{p.name}: shape {named[p.name].shape} != {p.value.shape}")
            p.value = named[p.name].astype(np.float64).copy()
