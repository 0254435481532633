"""Deterministic random-stream derivation.

Every sampled object in the library derives its generator from a master
seed plus a tuple of purpose tags (strings or integers) through a
stateless mix, so results are bit-reproducible regardless of evaluation
order or thread count.
"""

import zlib

import numpy as np

_MASK = (1 << 63) - 1


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK
    return zlib.crc32(str(tag).encode("utf-8"))


def derive_seed_sequence(master_seed, *tags) -> np.random.SeedSequence:
    entropy = [int(master_seed) & _MASK] + [_tag_to_int(t) for t in tags]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed, *tags) -> np.random.Generator:
    """Generator for (master_seed, *tags); same inputs give the same stream."""
    return np.random.default_rng(derive_seed_sequence(master_seed, *tags))
