"""Deterministic seed derivation shared by every stochastic component.

All randomness flows through numpy SeedSequence keyed by integer words, so
runs are bit-reproducible across platforms for a fixed configuration.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _words(words: tuple[int, ...]) -> list[int]:
    return [int(w) & _MASK for w in words]


def make_rng(*words: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_words(words))))


def derive_seed(*words: int) -> int:
    """Collapse a word tuple into a single 64-bit seed."""
    return int(np.random.SeedSequence(_words(words)).generate_state(1, np.uint64)[0])
