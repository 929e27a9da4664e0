"""
Deterministic splittable random streams

One root seed, child streams derived by a key path, so any attempt, trial or
edge can be replayed in isolation.
"""

import zlib
from typing import Union

import numpy as np
from numpy.random import Generator, SeedSequence

KeyPart = Union[int, str]


def _key_int(part: KeyPart) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"key parts must be non-negative, got {part}")
    return int(part)


def seed_sequence(seed: int, *path: KeyPart) -> SeedSequence:
    """SeedSequence for the stream at `path` under root `seed`"""
    return SeedSequence(entropy=int(seed), spawn_key=tuple(_key_int(p) for p in path))


def make_rng(seed: int, *path: KeyPart) -> Generator:
    """Generator for the stream at `path` under root `seed`"""
    return np.random.default_rng(seed_sequence(seed, *path))


def derive_seed(seed: int, *path: KeyPart) -> int:
    """Integer child seed, stable across runs and platforms"""
    return int(seed_sequence(seed, *path).generate_state(1, dtype=np.uint32)[0])
