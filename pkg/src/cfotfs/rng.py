"""Seeding helpers for reproducible, order-independent random streams."""

from __future__ import annotations

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Return a Generator; pass a Generator through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream identified by (master_seed, key).

    Streams are fixed by the key alone, so parallel workers that draw from
    substream(seed, i) produce the same realizations in any execution order.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.default_rng(ss)


def sample_cn(rng: np.random.Generator, variance, size=None) -> np.ndarray:
    """Circularly-symmetric complex normal samples with the given variance."""
    variance = np.asarray(variance, dtype=float)
    re = rng.standard_normal(size if size is not None else variance.shape)
    im = rng.standard_normal(size if size is not None else variance.shape)
    return np.sqrt(variance / 2.0) * (re + 1j * im)
