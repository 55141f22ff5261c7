"""Central finite-difference oracle for checking recorded adjoints."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter, Tape


def analytic_grads(loss_fn, params: list[Parameter]) -> list[np.ndarray]:
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    grads = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    return grads


def numeric_grads(loss_fn, params: list[Parameter], step: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn()`` (evaluated without a tape)."""
    out = []
    for p in params:
        g = np.zeros_like(p.value)
        flat, gflat = p.value.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = float(loss_fn().value)
            flat[k] = orig - step
            down = float(loss_fn().value)
            flat[k] = orig
            gflat[k] = (up - down) / (2 * step)
        out.append(g)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``|a - b| / max(|a| + |b|, 1e-12)`` in the Euclidean norm."""
    num = float(np.linalg.norm(a - b))
    den = max(float(np.linalg.norm(a) + np.linalg.norm(b)), 1e-12)
    return num / den


def check(loss_fn, params: list[Parameter], step: float = 1e-5) -> float:
    """Worst per-parameter relative error between analytic and numeric gradients."""
    ana = analytic_grads(loss_fn, params)
    num = numeric_grads(loss_fn, params, step)
    return max(relative_error(a, n) for a, n in zip(ana, num))
