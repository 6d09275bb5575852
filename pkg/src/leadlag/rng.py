"""Seeded random streams.

Every stochastic routine draws from a Philox (counter-based) generator keyed
by the master seed plus string labels, so the stream an entity receives does
not depend on which worker runs it or in what order entities are visited.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def stream(seed: int, *labels: str) -> np.random.Generator:
    """Generator for ``(seed, *labels)``; identical arguments give identical draws."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    entropy = [seed & 0xFFFFFFFF, seed >> 32]
    for label in labels:
        entropy.extend(_label_words(str(label)))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
