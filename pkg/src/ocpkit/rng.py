"""Seeded, counter-based random streams.

Every random draw in the package goes through a ``numpy.random.Generator``
backed by Philox.  Substreams are keyed by a tuple ``(master_seed, *keys)``
so that a cell of an experiment grid always sees the same randomness no
matter which other cells exist or which worker runs it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"substream keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(master_seed: int, *keys) -> np.random.Generator:
    """Return an independent generator for ``(master_seed, *keys)``.

    Integer keys are used verbatim, anything else is hashed from its ``str``.
    """
    entropy = [_key_to_int(master_seed), *(_key_to_int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or Generator is required")
    return substream(int(rng))
