"""Deterministic random streams.

A run is driven by one 64-bit experiment seed. Every consumer (problem
generation, initialization, each solver) pulls its own stream derived
from (seed, label), so adding draws to one stream never perturbs the
others. Labels are hashed with SHA-256 into seed-sequence entropy, which
keeps the derivation stable across processes and sessions.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_rng(seed: int, label: str) -> np.random.Generator:
    """Return the generator for the stream `label` of experiment `seed`."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32).tolist()
    return np.random.default_rng(np.random.SeedSequence([seed & _MASK64, *words]))
