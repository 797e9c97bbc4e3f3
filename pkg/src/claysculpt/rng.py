"""Named random substreams derived from one root seed."""

import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Return a generator keyed by ``seed`` and a path of names/ints.

    The same (seed, names) always yields the same stream, and distinct names
    give statistically independent streams.
    """
    key = [int(seed) & 0xFFFFFFFF]
    for name in names:
        if isinstance(name, (int, np.integer)):
            key.append(int(name) & 0xFFFFFFFF)
        else:
            key.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(key))


def child_seed(seed: int, *names) -> int:
    return int(substream(seed, *names).integers(0, 2**31 - 1))
