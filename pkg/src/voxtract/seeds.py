"""Stable seed derivation for reproducible experiment grids."""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_seed(*parts) -> int:
    """Collapse a mixed tuple of ints and strings into one 64-bit seed.

    The mapping is stable across processes and runs, so two grids with the
    same configuration derive identical per-cell seeds regardless of worker
    scheduling.
    """
    entropy = []
    for part in parts:
        if isinstance(part, str):
            entropy.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            entropy.append(int(part) & _MASK64)
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part)!r}")
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
