"""Seed derivation helpers.

All randomness in the package flows through named substreams derived from a
single master seed, so independent workloads (trials, sweep points, frames)
produce the same aggregate results regardless of execution order.
"""

import hashlib

import numpy as np

__all__ = ["derive_seedseq", "derive_rng", "derive_philox"]


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seedseq(master_seed: int, *tags) -> np.random.SeedSequence:
    """SeedSequence for the substream named by (master_seed, *tags).

    Tags may be strings (domain names) or integers (trial/point indices);
    strings are hashed to stable 64-bit integers.
    """
    entropy = [int(master_seed)] + [_tag_to_int(t) for t in tags]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *tags) -> np.random.Generator:
    """PCG64 generator on the named substream."""
    return np.random.Generator(np.random.PCG64(derive_seedseq(master_seed, *tags)))


def derive_philox(master_seed: int, *tags) -> np.random.Generator:
    """Counter-based (Philox) generator, used for bitstream construction."""
    return np.random.Generator(np.random.Philox(derive_seedseq(master_seed, *tags)))
