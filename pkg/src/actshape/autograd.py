"""A small reverse-mode autodiff over numpy arrays.

Only the operations the actor-critic and the PPO loss need. Each op records
its parents and a closure mapping the output gradient to parent gradients.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = _parents
        self._backward: Optional[Callable] = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        order = _topo(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _topo(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1 - y * y),))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,))


def square(x: Tensor) -> Tensor:
    return _make(x.data * x.data, (x,), lambda g: (2 * g * x.data,))


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    return _make(
        np.where(pick_a, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(np.where(pick_a, g, 0), a.shape), _unbroadcast(np.where(pick_a, 0, g), b.shape)),
    )


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (np.where(inside, g, 0),))


# --------------------------------------------------------------------------
# reductions and indexing


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001
    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(x.data.sum(axis=axis), (x,), backward)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    return _make(x.data.mean(), (x,), lambda g: (np.full(x.shape, g / n, dtype=x.data.dtype),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def reshape(x: Tensor, shape) -> Tensor:
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def columns(x: Tensor, start: int, stop: int) -> Tensor:
    """``x[:, start:stop]``"""

    def backward(g):
        out = np.zeros_like(x.data)
        out[:, start:stop] = g
        return (out,)

    return _make(x.data[:, start:stop], (x,), backward)


def gather_last(x: Tensor, index: np.ndarray) -> Tensor:
    """``x[..., index]`` picking one entry of the last axis; ``index`` has ``x.shape[:-1]``."""
    index = np.asarray(index)[..., None]

    def backward(g):
        out = np.zeros_like(x.data)
        np.put_along_axis(out, index, g[..., None], axis=-1)
        return (out,)

    return _make(np.take_along_axis(x.data, index, axis=-1)[..., 0], (x,), backward)


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """``x[i, index[i]]`` for each row ``i``."""
    rows = np.arange(x.shape[0])

    def backward(g):
        out = np.zeros_like(x.data)
        out[rows, index] = g
        return (out,)

    return _make(x.data[rows, index], (x,), backward)


# --------------------------------------------------------------------------
# fused categorical ops


def log_softmax(logits: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Row-wise log-softmax. Masked-out entries come out as -inf and get zero gradient."""
    z = logits.data
    if mask is None:
        shifted = z - z.max(axis=-1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        out = shifted - lse
        p = np.exp(out)

        def backward(g):
            return (g - p * g.sum(axis=-1, keepdims=True),)

        return _make(out, (logits,), backward)

    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        from .shaping import AllMasked

        raise AllMasked("a row has no available action")
    neg_inf = np.array(-np.inf, dtype=z.dtype)
    zm = np.where(mask, z, neg_inf)
    shifted = zm - zm.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0)
    out = np.where(mask, shifted - np.log(e.sum(axis=-1, keepdims=True)), neg_inf)
    p = np.where(mask, np.exp(out), 0)

    def backward(g):
        g = np.where(mask, g, 0)
        return (np.where(mask, g - p * g.sum(axis=-1, keepdims=True), 0),)

    return _make(out, (logits,), backward)


def categorical_entropy(logp: Tensor) -> Tensor:
    """``-sum p log p`` over the last axis from log-probabilities (-inf entries contribute 0)."""
    lp = logp.data
    live = np.isfinite(lp)
    safe = np.where(live, lp, 0)
    p = np.where(live, np.exp(safe), 0)
    h = -(p * safe).sum(axis=-1)

    def backward(g):
        # dH/dlogp_j = -p_j (1 + logp_j)
        return (np.where(live, -g[..., None] * p * (1 + safe), 0),)

    return _make(h, (logp,), backward)
