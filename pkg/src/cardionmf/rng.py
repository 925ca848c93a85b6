"""Deterministic seed derivation.

All randomness in the package flows through here. Each consumer derives
its own generator from an integer seed plus a tuple of integer path
components (block index, restart index, layer index, ...), so parallel
and serial execution schedules see identical streams.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "derive_seed"]


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` at a derivation path.

    The same (seed, path) always yields the same stream, independent of
    any other generator created before or after.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child integer seed from ``seed`` and a path, for configs
    that carry their own seed field."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])
