"""Reverse-mode differentiation over dense float64 matrices, plus Adam.

Every value is a 2-D ``numpy`` array. Binary element-wise ops accept equal
shapes, a ``(1, c)`` row operand or an ``(n, 1)`` column operand; gradients
are summed back to the operand's shape.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


def _as_matrix(value) -> np.ndarray:
    a = np.array(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got shape {a.shape}")
    return a


def _checked(a: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{op} produced a non-finite value")
    return a


class Node:
    """A value in the computation graph.

    ``parents`` holds ``(node, local_grad)`` pairs where ``local_grad`` maps
    the upstream gradient of this node to the contribution for ``node``.
    """

    __slots__ = ("value", "grad", "parents", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, parents=(), name: str | None = None):
        self.value = _as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.parents = tuple(parents)
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in self.parents)
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, other)
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, 1.0 / other)
        return divide(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scalar_mul(self, -1.0)


def parameter(value, name: str | None = None) -> Node:
    return Node(value, requires_grad=True, name=name)


def constant(value) -> Node:
    return value if isinstance(value, Node) else Node(value)


def _make(value, op: str, *parents) -> Node:
    live = [(p, fn) for p, fn in parents if p.requires_grad]
    return Node(_checked(value, op), parents=live)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _broadcast_shape(a: Node, b: Node, op: str):
    (ra, ca), (rb, cb) = a.shape, b.shape
    rows_ok = ra == rb or ra == 1 or rb == 1
    cols_ok = ca == cb or ca == 1 or cb == 1
    if not (rows_ok and cols_ok):
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def matmul(a, b) -> Node:
    a, b = constant(a), constant(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, "matmul",
                 (a, lambda g: g @ bv.T),
                 (b, lambda g: av.T @ g))


def add(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.value + b.value, "add",
                 (a, lambda g: _unbroadcast(g, sa)),
                 (b, lambda g: _unbroadcast(g, sb)))


def sub(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.value - b.value, "sub",
                 (a, lambda g: _unbroadcast(g, sa)),
                 (b, lambda g: -_unbroadcast(g, sb)))


def hadamard(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b, "hadamard")
    av, bv = a.value, b.value
    return _make(av * bv, "hadamard",
                 (a, lambda g: _unbroadcast(g * bv, av.shape)),
                 (b, lambda g: _unbroadcast(g * av, bv.shape)))


def divide(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b, "divide")
    if np.any(b.value == 0):
        raise FloatingPointError("division by zero")
    av, bv = a.value, b.value
    return _make(av / bv, "divide",
                 (a, lambda g: _unbroadcast(g / bv, av.shape)),
                 (b, lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape)))


def scalar_mul(a, s: float) -> Node:
    a = constant(a)
    s = float(s)
    return _make(a.value * s, "scalar_mul", (a, lambda g: g * s))


def relu(a) -> Node:
    a = constant(a)
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), "relu", (a, lambda g: g * mask))


def exp(a) -> Node:
    a = constant(a)
    out = np.exp(a.value)
    return _make(out, "exp", (a, lambda g: g * out))


def log(a) -> Node:
    a = constant(a)
    if np.any(a.value <= 0):
        raise FloatingPointError("log of a non-positive entry")
    av = a.value
    return _make(np.log(av), "log", (a, lambda g: g / av))


def clip_min(a, floor: float) -> Node:
    """``max(a, floor)``; entries at or below the floor pass no gradient."""
    a = constant(a)
    mask = a.value > floor
    return _make(np.where(mask, a.value, floor), "clip_min", (a, lambda g: g * mask))


def softmax_rows(a) -> Node:
    a = constant(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def local(g):
        return s * (g - (g * s).sum(axis=1, keepdims=True))

    return _make(s, "softmax_rows", (a, local))


def concat_rows(*nodes) -> Node:
    nodes = [constant(n) for n in nodes]
    widths = {n.shape[1] for n in nodes}
    if len(widths) != 1:
        raise ShapeError(f"concat_rows: mixed widths {sorted(widths)}")
    bounds = np.cumsum([0] + [n.shape[0] for n in nodes])
    parents = [(n, (lambda lo, hi: lambda g: g[lo:hi])(lo, hi))
               for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:])]
    return _make(np.vstack([n.value for n in nodes]), "concat_rows", *parents)


def take_cols(a, cols) -> Node:
    a = constant(a)
    cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
    shape = a.shape

    def local(g):
        out = np.zeros(shape)
        np.add.at(out, (slice(None), cols), g)
        return out

    return _make(a.value[:, cols], "take_cols", (a, local))


def pick(a, index) -> Node:
    """Entry ``a[i, index[i]]`` of every row, as an ``(n, 1)`` column."""
    a = constant(a)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (a.shape[0],):
        raise ShapeError(f"pick: need one index per row, got {index.shape} for {a.shape}")
    rows = np.arange(a.shape[0])
    shape = a.shape

    def local(g):
        out = np.zeros(shape)
        out[rows, index] = g[:, 0]
        return out

    return _make(a.value[rows, index][:, None], "pick", (a, local))


def total(a) -> Node:
    a = constant(a)
    shape = a.shape
    return _make(a.value.sum().reshape(1, 1), "sum", (a, lambda g: np.full(shape, g[0, 0])))


def mean(a) -> Node:
    a = constant(a)
    return scalar_mul(total(a), 1.0 / a.value.size)


def mix(weights, candidates: np.ndarray) -> Node:
    """Row-wise convex mixing: ``out[i] = sum_m weights[i, m] * candidates[i, m]``.

    ``candidates`` is a constant ``(n, m, f)`` array; only ``weights`` is
    differentiated.
    """
    w = constant(weights)
    cand = np.asarray(candidates, dtype=np.float64)
    if cand.ndim != 3 or cand.shape[:2] != w.shape:
        raise ShapeError(f"mix: weights {w.shape} vs candidates {cand.shape}")
    return _make(np.einsum("nm,nmf->nf", w.value, cand), "mix",
                 (w, lambda g: np.einsum("nf,nmf->nm", g, cand)))


def detach(a) -> Node:
    return Node(constant(a).value.copy())


def straight_through(forward_value, surrogate) -> Node:
    """Value of ``forward_value`` with the gradient of ``surrogate``.

    Computed as ``forward + (surrogate - detach(surrogate))``; the correction
    term is exactly zero in value.
    """
    surrogate = constant(surrogate)
    return add(forward_value, sub(surrogate, detach(surrogate)))


def _topological(root: Node) -> list[Node]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every reachable node."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")
    order = _topological(loss)
    upstream = {id(loss): np.ones((1, 1))}
    for node in reversed(order):
        g = upstream.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = node.grad + g
        for parent, local in node.parents:
            contrib = local(g)
            key = id(parent)
            upstream[key] = upstream[key] + contrib if key in upstream else contrib


class Adam:
    """Adam with bias correction; ``step`` also zeroes the gradients."""

    def __init__(self, params, lr: float = 0.05, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.value = p.value - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.zero_grad()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
