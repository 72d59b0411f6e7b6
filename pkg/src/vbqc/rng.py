"""Keyed RNG substreams so results never depend on scheduling order."""

from __future__ import annotations

import numpy as np

CLIENT = 0
SERVER = 1
PARTITION = 2

Seed = int | np.random.SeedSequence


def seed_sequence(seed: Seed | None) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child(seed: Seed, *key: int) -> np.random.SeedSequence:
    """Deterministic child sequence addressed by an integer key path."""
    base = seed_sequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key))


def substream(seed: Seed, *key: int) -> np.random.Generator:
    return np.random.default_rng(child(seed, *key))


def trial_seed(master: Seed, trial: int) -> np.random.SeedSequence:
    return child(master, trial)
