"""Shared plumbing for the three generative factors: weighted data and batching."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .errors import ConfigError, ModelError
from .numcore import Parameter, load_params, save_params


def aggregate(examples, weights=None, key=None):
    """Merge identical examples by summing their weights; drop zero-weight ones.

    The weighted log-likelihood is unchanged, so training on the merged list
    optimizes the same objective. Order of first occurrence is kept.
    """
    if weights is None:
        weights = [1.0] * len(examples)
    merged: OrderedDict = OrderedDict()
    for ex, w in zip(examples, weights):
        if w < 0:
            raise ConfigError(f"example weights must be nonnegative, got {w}")
        if w == 0:
            continue
        k = key(ex) if key else ex
        if k in merged:
            merged[k][1] += w
        else:
            merged[k] = [ex, float(w)]
    return [(ex, w) for ex, w in merged.values()]


def drop_zero(examples, weights=None):
    if weights is None:
        weights = [1.0] * len(examples)
    out = []
    for ex, w in zip(examples, weights):
        if w < 0:
            raise ConfigError(f"example weights must be nonnegative, got {w}")
        if w > 0:
            out.append((ex, float(w)))
    return out


def minibatches(n: int, batch_size: int, rng: np.random.Generator | None):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    return [order[k:k + batch_size] for k in range(0, n, batch_size)]


def pad(seqs, fill: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad integer sequences; returns (ids (B, T), mask (B, T))."""
    T = max((len(s) for s in seqs), default=0)
    ids = np.full((len(seqs), max(T, 1)), fill, dtype=np.int64)
    mask = np.zeros((len(seqs), max(T, 1)), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
        mask[i, :len(s)] = True
    return ids, mask


class ParamModel:
    """Mixin for models that keep their trainable state in ``self.params``."""

    params: dict[str, Parameter]

    def parameters(self) -> list[Parameter]:
        return [self.params[k] for k in sorted(self.params)]

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.value for k, p in self.params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) ^ set(arrays)
        if missing:
            raise ModelError(f"parameter names do not match: {sorted(missing)}")
        for k, v in arrays.items():
            if v.shape != self.params[k].shape:
                raise ModelError(f"shape mismatch for {k}: {v.shape} vs {self.params[k].shape}")
            self.params[k].value[...] = v

    def save_params(self, path, meta=None) -> None:
        save_params(path, self.arrays(), meta)

    def read_params(self, path) -> dict:
        arrays, meta = load_params(path)
        self.load_arrays(arrays)
        return meta
