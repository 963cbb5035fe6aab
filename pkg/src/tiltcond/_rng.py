"""Counter-based random streams: one Philox key per seed, one counter block per label."""

import zlib

import numpy as np


def stream(seed: int, *labels) -> np.random.Generator:
    label = "/".join(str(x) for x in labels)
    counter = [zlib.crc32(label.encode()), 0, 0, 0]
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def uniform_ball(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    """``size`` points uniform in the unit ball of ``R^n``."""
    D = rng.standard_normal((size, n))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    return D * rng.random((size, 1)) ** (1.0 / n)
