"""Deterministic random-number streams.

Every stochastic task in the package (simulating a trajectory, drawing one
bootstrap resample, sampling innovations from the CLI) owns its own
Generator derived from a single 64-bit master seed.  The derivation is a
documented mixing rule so that results are reproducible across runs,
platforms and worker counts:

    SeedSequence entropy = [master_seed, crc32(tag), *indices]

where ``tag`` names the purpose of the stream ("trajectory", "bootstrap",
"sample", ...) and ``indices`` identify the task (trajectory index,
replicate index).  Distinct (tag, indices) pairs give statistically
independent Philox streams; the same pair always gives the same stream.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "seed_sequence", "derive_seed"]


def seed_sequence(master_seed: int, tag: str, *indices: int) -> np.random.SeedSequence:
    """SeedSequence for the (tag, indices) sub-stream of a master seed."""
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode("utf-8"))]
    entropy.extend(int(i) for i in indices)
    return np.random.SeedSequence(entropy)


def stream(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Philox generator for the (tag, indices) sub-stream of a master seed."""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, tag, *indices)))


def derive_seed(master_seed: int, tag: str, *indices: int) -> int:
    """Collapse a sub-stream identity into a fresh 64-bit master seed.

    Used when a component (e.g. the bootstrap) takes a scalar seed of its
    own: the experiments layer derives one per trajectory so that nested
    seeding stays collision-free.
    """
    state = seed_sequence(master_seed, tag, *indices).generate_state(2, np.uint64)
    return int(state[0] ^ (state[1] >> 1))
