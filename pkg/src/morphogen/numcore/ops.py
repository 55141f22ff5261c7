"""Differentiable primitives over :class:`Tensor`.

Every op accepts vectors or row-batched matrices and returns a Tensor whose
adjoint rule is recorded on the active tape.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, RejectedInput
from .tensor import DTYPE, Tensor, accumulate, as_tensor, make_output


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        accumulate(a, _unbroadcast(g, a.shape))
        accumulate(b, _unbroadcast(g, b.shape))

    return make_output(a.value + b.value, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        accumulate(a, _unbroadcast(g, a.shape))
        accumulate(b, -_unbroadcast(g, b.shape))

    return make_output(a.value - b.value, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        accumulate(a, _unbroadcast(g * b.value, a.shape))
        accumulate(b, _unbroadcast(g * a.value, b.shape))

    return make_output(a.value * b.value, (a, b), bw)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return make_output(a.value * c, (a,), lambda g: accumulate(a, g * c))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        av, bv = a.value, b.value
        if av.ndim == 1 and bv.ndim == 1:
            accumulate(a, g * bv)
            accumulate(b, g * av)
        elif av.ndim == 1:
            accumulate(a, bv @ g)
            accumulate(b, np.outer(av, g))
        elif bv.ndim == 1:
            accumulate(a, np.outer(g, bv))
            accumulate(b, av.T @ g)
        else:
            accumulate(a, g @ bv.T)
            accumulate(b, av.T @ g)

    try:
        value = a.value @ b.value
    except ValueError as exc:
        raise RejectedInput(f"matmul shape mismatch {a.shape} @ {b.shape}") from exc
    return make_output(value, (a, b), bw)


def affine(x, W, b) -> Tensor:
    """``W @ x + b`` for a vector ``x`` or row-wise for a batch ``x`` of shape (B, in)."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if W.value.ndim != 2 or x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise RejectedInput(f"affine shape mismatch: x{x.shape} W{W.shape} b{b.shape}")
    xv, Wv = x.value, W.value
    value = xv @ Wv.T + b.value

    def bw(g):
        if xv.ndim == 1:
            accumulate(W, np.outer(g, xv))
            accumulate(b, g)
        else:
            accumulate(W, g.T @ xv)
            accumulate(b, g.sum(axis=0))
        accumulate(x, g @ Wv)

    return make_output(value, (x, W, b), bw)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.value)
    return make_output(y, (x,), lambda g: accumulate(x, g * (1.0 - y * y)))


def sigmoid_value(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = sigmoid_value(x.value)
    return make_output(y, (x,), lambda g: accumulate(x, g * y * (1.0 - y)))


def total(x) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    x = as_tensor(x)
    shape = x.shape
    return make_output(np.asarray(x.value.sum()), (x,), lambda g: accumulate(x, np.broadcast_to(g, shape)))


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            accumulate(p, piece)

    return make_output(np.concatenate([p.value for p in parts], axis=axis), parts, bw)


def stack(parts, axis: int = 1) -> Tensor:
    parts = [as_tensor(p) for p in parts]

    def bw(g):
        for k, p in enumerate(parts):
            accumulate(p, np.take(g, k, axis=axis))

    return make_output(np.stack([p.value for p in parts], axis=axis), parts, bw)


def take(x, index: int, axis: int = 1) -> Tensor:
    """Slice ``index`` out of ``axis`` (e.g. one time step of a (B, T, d) batch)."""
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        np.moveaxis(full, axis, 0)[index] = g
        accumulate(x, full)

    return make_output(np.take(x.value, index, axis=axis), (x,), bw)


def embedding(table, ids) -> Tensor:
    """Gather rows of ``table``; ``ids`` is an int or an int array."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)

    def bw(g):
        if isinstance(table, Tensor) and table.tracked:
            full = np.zeros_like(table.value)
            np.add.at(full, ids, g)
            accumulate(table, full)

    return make_output(table.value[ids], (table,), bw)


def multi_hot_embedding(table, hot: np.ndarray) -> Tensor:
    """``hot @ table``: each output row is the sum of the table rows switched on in ``hot``.

    ``hot`` is a 0/1 vector over table rows or a (B, rows) batch of them.
    """
    table = as_tensor(table)
    hot = np.asarray(hot, dtype=DTYPE)

    def bw(g):
        accumulate(table, np.outer(hot, g) if hot.ndim == 1 else hot.T @ g)

    return make_output(hot @ table.value, (table,), bw)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return make_output(x.value.reshape(shape), (x,), lambda g: accumulate(x, g.reshape(old)))


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    z = v - v.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    z = v - v.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax_cross_entropy(logits, target, weights=None) -> Tensor:
    """Summed ``-log softmax(logits)[target]``.

    ``logits`` is a vector with an int ``target`` or a (B, V) batch with a target
    array; ``weights`` scales each row's loss (padding rows get weight 0).
    """
    logits = as_tensor(logits)
    lv = logits.value
    single = lv.ndim == 1
    l2 = lv[None, :] if single else lv
    tgt = np.atleast_1d(np.asarray(target, dtype=np.int64))
    V = l2.shape[1]
    if tgt.shape[0] != l2.shape[0]:
        raise RejectedInput("one target per logit row is required")
    if np.any(tgt < 0) or np.any(tgt >= V):
        raise RejectedInput(f"target index out of range for vocabulary of size {V}")
    w = np.ones(l2.shape[0]) if weights is None else np.asarray(weights, dtype=DTYPE)
    logp = log_softmax(l2)
    rows = np.arange(l2.shape[0])
    loss = -(w * logp[rows, tgt]).sum()

    def bw(g):
        d = np.exp(logp)
        d[rows, tgt] -= 1.0
        d *= (w * g)[:, None]
        accumulate(logits, d[0] if single else d)

    return make_output(np.asarray(loss), (logits,), bw)


def dropout(x, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity when ``training`` is false or ``rate`` is 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an explicit generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_output(x.value * keep, (x,), lambda g: accumulate(x, g * keep))
