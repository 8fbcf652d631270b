"""Deterministic seed derivation.

Every random stream in the package is derived from one global seed plus a
purpose tag (and optional extra keys), so results do not depend on call order
or on how work is split across workers.
"""

import hashlib

import numpy as np


def derive_seed(seed, *parts):
    """Hash ``(seed, *parts)`` into a 64-bit integer seed."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(repr(p).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(seed, *parts):
    return np.random.default_rng(derive_seed(seed, *parts))
