import zlib

import numpy as np


def counter_rng(seed: int, stream: str = "") -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``.

    Each named stream gets an independent key, so adding or reordering
    checks in an experiment never shifts another check's random numbers.
    """
    seed = int(seed) & ((1 << 64) - 1)
    key = (zlib.crc32(stream.encode()) << 64) | seed
    return np.random.Generator(np.random.Philox(key=key))


def as_rng(rng, stream: str = "") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return counter_rng(0 if rng is None else rng, stream)
