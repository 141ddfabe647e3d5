"""Seed handling.

Every random consumer gets its own numpy ``Generator`` derived from one
root seed and a stable text label, so adding a new consumer never shifts
the streams of the existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Return the generator for ``seed`` under the label path ``labels``."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = tuple(_label_key(str(lab)) for lab in labels)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def as_generator(seed, *labels: str | int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    return substream(int(seed), *labels)
