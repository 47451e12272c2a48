"""Seeded random streams.

All randomness goes through Philox (a counter-based 64-bit generator). Each
named array gets its own stream derived from ``(seed, name)``, so adding a new
draw never shifts existing ones.
"""

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])
    return np.random.Generator(np.random.Philox(ss))
