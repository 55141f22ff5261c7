"""Gradient clipping, SGD and AdaDelta updates over lists of Parameters."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Parameter


def global_norm(params) -> float:
    return float(np.sqrt(sum(float((p.grad * p.grad).sum()) for p in params)))


def clip_grad_norm(params, clip: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``clip``.

    Returns the norm before clipping.
    """
    if clip <= 0:
        raise ConfigError(f"clip must be positive, got {clip}")
    norm = global_norm(params)
    if norm > clip:
        factor = clip / norm
        for p in params:
            p.grad *= factor
    return norm


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


def clip_and_step_sgd(params: list[Parameter], lr: float, clip: float | None = None,
                      weight_decay: float = 0.0) -> float:
    """``p <- p - lr * (grad + weight_decay * p)`` after global-norm clipping.

    Returns the gradient norm before clipping.
    """
    if not lr > 0 or not np.isfinite(lr):
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if weight_decay < 0:
        raise ConfigError(f"weight decay must be nonnegative, got {weight_decay}")
    norm = clip_grad_norm(params, clip) if clip is not None else global_norm(params)
    for p in params:
        p.value -= lr * (p.grad + weight_decay * p.value)
    zero_grads(params)
    return norm


def adadelta_step(params: list[Parameter], rho: float = 0.95, eps: float = 1e-6,
                  lr: float = 1.0, clip: float | None = None) -> None:
    """One AdaDelta update; running averages live in ``Parameter.state``."""
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho must lie in (0, 1), got {rho}")
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    if clip is not None:
        clip_grad_norm(params, clip)
    for p in params:
        st = p.state
        if "sq_grad" not in st:
            st["sq_grad"] = np.zeros_like(p.value)
            st["sq_delta"] = np.zeros_like(p.value)
        g = p.grad
        sq_grad = st["sq_grad"]
        sq_grad *= rho
        sq_grad += (1 - rho) * g * g
        delta = np.sqrt(st["sq_delta"] + eps) / np.sqrt(sq_grad + eps) * g
        st["sq_delta"] *= rho
        st["sq_delta"] += (1 - rho) * delta * delta
        p.value -= lr * delta
    zero_grads(params)
