"""Splittable seed derivation.

Every random stream in the package is addressed by a root seed plus a path of
keys, so results do not depend on call order or on whether work runs serially
or in a process pool.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def _key(k: int | str) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    if k < 0:
        raise ValueError(f"seed keys must be non-negative, got {k}")
    return int(k)


def derive(seed: SeedLike, *keys: int | str) -> np.random.SeedSequence:
    """Return the child seed sequence at ``seed / keys[0] / keys[1] / ...``."""
    extra = tuple(_key(k) for k in keys)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + extra)
    return np.random.SeedSequence(int(seed), spawn_key=extra)


def make_rng(seed: SeedLike, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *keys))


def int_seed(seed: SeedLike, *keys: int | str) -> int:
    """Collapse a derived seed to a plain 63-bit integer (JSON friendly)."""
    state = derive(seed, *keys).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))
