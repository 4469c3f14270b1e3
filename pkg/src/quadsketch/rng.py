"""Deterministic seed derivation.

Every randomized operation takes a 64-bit seed. Child streams (per scale,
per component, per repetition) are derived by hashing the parent seed with a
tuple of labels, so results do not depend on build order and parallel
branches stay reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *labels: int | str) -> int:
    """Hash ``seed`` and the label path into a fresh 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *labels: int | str) -> np.random.Generator:
    """A PCG64 generator keyed by ``seed`` and a label path."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
