"""Deterministic seed derivation.

One global seed fans out to independent per-module, per-document substreams.
The derivation hashes ``seed:module:key`` with SHA-256, so streams do not
depend on processing order, worker count, or Python's salted ``hash()``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, module: str, key: str = "") -> int:
    """Return a 64-bit substream seed for (seed, module, key)."""
    digest = hashlib.sha256(f"{seed}:{module}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, module: str, key: str = "") -> np.random.Generator:
    """A fresh PCG64 generator for the given substream coordinates."""
    return np.random.default_rng(derive_seed(seed, module, key))
