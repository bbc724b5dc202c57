"""Named random streams derived from one integer seed.

Each consumer gets its own generator keyed by a stable hash of its name, so
adding a consumer never shifts the draws of the existing ones.
"""
import zlib

import numpy as np


def stream(seed, name):
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


def streams(seed, names):
    return {n: stream(seed, n) for n in names}
