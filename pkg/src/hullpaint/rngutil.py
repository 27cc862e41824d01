"""Deterministic seed derivation.

Every random draw in an edit job comes from a generator derived from the job
seed plus a purpose tag (and usually a step/view index), never from shared
mutable RNG state. This is what makes checkpoint resume bit-identical: a run
restarted at step k draws exactly the numbers the uninterrupted run drew.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Hash an arbitrary tuple of ints/strings into a stable 64-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(*parts) -> np.random.Generator:
    """A fresh Generator keyed by the given parts."""
    return np.random.default_rng(derive_seed(*parts))
