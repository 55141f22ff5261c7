"""Parameter initialisation and seeded generator derivation."""

import zlib

import numpy as np


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform in [-r, r] with r = sqrt(6 / (fan_in + fan_out)); shape (fan_out, fan_in)."""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in))


def zeros(*shape) -> np.ndarray:
    return np.zeros(shape)


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_rng(seed: int, *path) -> np.random.Generator:
    """A generator determined only by ``seed`` and the labels in ``path``.

    Distinct components draw from distinct streams, so adding randomness in
    one place never perturbs another.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
