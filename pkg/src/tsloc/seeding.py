"""Counter-based seed fan-out.

Every random component draws from a generator keyed by the master seed plus a
tuple of labels (trial index, component name, node id, ...).  Keys are hashed
to integers so that adding a node never shifts the stream of another node.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("integer seed keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


class Seeder:
    """Factory of independent, reproducible generators below one master seed."""

    def __init__(self, master_seed: int, *prefix):
        self.master_seed = int(master_seed)
        self.prefix = tuple(prefix)

    def child(self, *keys) -> "Seeder":
        return Seeder(self.master_seed, *self.prefix, *keys)

    def seed_sequence(self, *keys) -> np.random.SeedSequence:
        spawn_key = tuple(_key_to_int(k) for k in (*self.prefix, *keys))
        return np.random.SeedSequence(self.master_seed, spawn_key=spawn_key)

    def rng(self, *keys) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence(*keys))

    def integer_seed(self, *keys) -> int:
        return int(self.seed_sequence(*keys).generate_state(2, np.uint64)[0] >> np.uint64(1))

    def __repr__(self):
        return f"Seeder({self.master_seed}, prefix={self.prefix!r})"


def link_rng(rng, *keys) -> np.random.Generator:
    """Resolve ``rng`` to a generator: Seeders fan out per key, Generators pass through."""
    if isinstance(rng, Seeder):
        return rng.rng(*keys)
    if rng is None:
        raise ValueError("an rng or Seeder is required")
    return rng
