"""Deterministic per-module random streams derived from one master seed.

Every source of randomness in the package draws from a stream keyed by a
stable string label, so adding a new consumer never shifts the draws seen
by an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream_rng(seed: int, label: str) -> np.random.Generator:
    """Generator for the stream `label` under the master `seed`."""
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def derive_seed(seed: int, label: str) -> int:
    """Stable integer sub-seed for handing to a component config."""
    key = zlib.crc32(label.encode("utf-8"))
    state = np.random.SeedSequence(seed, spawn_key=(key,)).generate_state(1)
    return int(state[0])
