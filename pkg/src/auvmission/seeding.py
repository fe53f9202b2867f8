"""Named child random streams derived from one master seed.

Each subsystem draws from its own stream, so adding draws to (say) the
obstacle generator never shifts the waypoints or the optimiser.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def child_seed(seed: int, name: str, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), _name_key(name), *[int(i) for i in indices]])


def child_rng(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Return a generator for stream ``name`` (optionally sub-indexed)."""
    return np.random.default_rng(child_seed(seed, name, *indices))


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
