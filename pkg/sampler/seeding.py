"""
Reproducible random streams.

A single scenario seed is mixed with labels such as (trial, cycle, agent) into a
64-bit key for a counter-based Philox generator. Each (label tuple) owns its own
stream, so results do not depend on the order in which streams are consumed.
"""

import hashlib

import numpy as np


def derive_seed(base_seed: int, *labels) -> int:
    """Stable 64-bit seed for a base seed and any labels (same across runs and platforms)."""
    text = ":".join(str(v) for v in (int(base_seed),) + labels)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def make_rng(base_seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_seed(base_seed, *labels)))
