"""Seed splitting and the stable 64-bit hash used across the package.

Every random stream is derived from one 64-bit run seed:

    stream_seed = blake2b(f"{seed}:{name}", digest_size=8) as big-endian uint64
    generator   = numpy PCG64(stream_seed)

so a stream depends only on (seed, name) and not on the order in which
other streams were consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def stable_hash(text: str | bytes) -> int:
    """Unsigned 64-bit BLAKE2b digest of ``text`` (UTF-8)."""
    if isinstance(text, str):
        text = text.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


def stream_seed(seed: int, name: str) -> int:
    return stable_hash(f"{int(seed) & MASK64}:{name}")


def stream(seed: int, *names) -> np.random.Generator:
    name = "/".join(str(n) for n in names)
    return np.random.Generator(np.random.PCG64(stream_seed(seed, name)))
