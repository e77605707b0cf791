"""Deterministic, splittable random streams.

Every resampling task derives its own PCG64 generator from the run seed
plus a structured key (e.g. condition id and replicate index), so results
do not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"rng key parts must be nonnegative, got {part}")
        return int(part)
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")

def derive_rng(seed: int, *parts) -> np.random.Generator:
    """Generator for the stream named by (seed, *parts).

    String parts are hashed to stable 64-bit integers, so any mix of
    labels and indices forms a key. Same key, same stream, on any
    platform or schedule.
    """
    entropy = [_key_part(seed)] + [_key_part(p) for p in parts]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
