"""Deterministic seed derivation.

All Monte Carlo code derives a fresh generator per replicate from
``(seed, replicate_index)`` so that results do not depend on scheduling
order and replicates can be merged by concatenation.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *indices: int) -> np.random.Generator:
    """Return a generator keyed by a 64-bit seed and a replicate index path."""
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(i) for i in indices))
    return np.random.default_rng(ss)
