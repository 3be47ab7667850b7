"""Deterministic RNG construction from mixed string/int key material.

Python's builtin hash() is salted per process, so every seeded draw in this
package goes through this module instead: string keys are digested with
sha256, which is stable across processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def key_to_int(key: str | int) -> int:
    """Map a key to a stable unsigned 64-bit integer."""
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*keys: str | int) -> np.random.Generator:
    """A Generator seeded by the tuple of keys; same keys, same stream."""
    return np.random.default_rng([key_to_int(k) for k in keys])
