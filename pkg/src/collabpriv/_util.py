import hashlib

import numpy as np


def stable_hash(obj, bits: int = 64) -> int:
    """Process-independent integer hash of ``repr(obj)``."""
    digest = hashlib.blake2b(repr(obj).encode("utf-8"), digest_size=bits // 8).digest()
    return int.from_bytes(digest, "big")


def child_rng(*parts) -> np.random.Generator:
    """Generator keyed by a tuple of ints / hashables."""
    entropy = [p if isinstance(p, int) and p >= 0 else stable_hash(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))
