"""Deterministic RNG stream derivation.

All randomness in the package funnels through a master seed.  Independent
streams are derived with counter-style keys so that replicates can run on
any worker in any order and still reproduce bit-identically.
"""

from __future__ import annotations

import numpy as np

__all__ = ["child_rng", "child_seed_sequence"]


def child_seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by (seed, *key)."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *key)."""
    return np.random.default_rng(child_seed_sequence(seed, *key))
