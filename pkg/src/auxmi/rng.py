"""Deterministic RNG substreams.

Every random quantity in a run is drawn from a generator keyed by a tuple
such as ``(seed, "block", 3)``. Keys are hashed to integers so the same key
always maps to the same stream regardless of execution order or process.
"""

import hashlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("integer substream keys must be non-negative")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed, *keys):
    """SeedSequence for ``seed`` specialised by ``keys`` (ints or strings)."""
    if isinstance(seed, np.random.SeedSequence):
        base_entropy = seed.entropy
        base_key = tuple(seed.spawn_key)
    else:
        base_entropy = _key_to_int(seed)
        base_key = ()
    return np.random.SeedSequence(
        base_entropy, spawn_key=base_key + tuple(_key_to_int(k) for k in keys)
    )


def substream(seed, *keys):
    """Independent ``numpy.random.Generator`` for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def as_generator(rng):
    """Accept a Generator, SeedSequence or int seed and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(rng))
    return substream(rng)
