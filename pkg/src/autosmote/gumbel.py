"""Gumbel-Softmax relaxation of categorical choices.

Works row-wise: logits of shape ``(n, m)`` give ``n`` independent draws over
``m`` decisions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gradcore as gc

U_CLAMP = 1e-12


def sample_gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard Gumbel noise ``-log(-log(U))`` with ``U`` kept off 0 and 1."""
    u = np.clip(rng.random(shape), U_CLAMP, 1.0 - U_CLAMP)
    return -np.log(-np.log(u))


@dataclass
class GumbelSample:
    soft: gc.Node        # (n, m), rows on the simplex
    hard_index: np.ndarray  # (n,)
    tau: float

    def one_hot(self) -> np.ndarray:
        out = np.zeros(self.soft.shape)
        out[np.arange(len(self.hard_index)), self.hard_index] = 1.0
        return out


def gumbel_softmax(logits, tau: float, rng: np.random.Generator | None = None,
                   noise: np.ndarray | None = None) -> GumbelSample:
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    logits = gc.constant(logits)
    if noise is None:
        noise = sample_gumbel_noise(logits.shape, rng)
    soft = gc.softmax_rows(gc.scalar_mul(gc.add(logits, noise), 1.0 / tau))
    # first maximal entry wins ties
    hard = np.argmax(soft.value, axis=1)
    return GumbelSample(soft, hard, tau)


def select_decision(sample: GumbelSample, decision_set: Sequence, row: int = 0):
    if len(decision_set) != sample.soft.shape[1]:
        raise ValueError(f"decision set has {len(decision_set)} entries, "
                         f"sample has {sample.soft.shape[1]} categories")
    return decision_set[int(sample.hard_index[row])]
