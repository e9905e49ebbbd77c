"""Seeded random streams.

All simulation randomness comes from PCG64 (``numpy.random.PCG64``) read as
53-bit uniform doubles.  Normal variates are produced from those uniforms
by the Box-Muller transform rather than numpy's ziggurat sampler, so frozen
test constants depend only on the PCG64 bit stream.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "pcg64+box-muller/1"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


def replicate_seeds(seed: int, replicates: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(int(replicates))


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    return rng.random(size)


def normals(rng: np.random.Generator, size) -> np.ndarray:
    shape = (size,) if np.isscalar(size) else tuple(size)
    k = int(np.prod(shape))
    half = (k + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:k].reshape(shape)


def categorical(rng: np.random.Generator, n: int, J: int) -> np.ndarray:
    """Labels in ``1..J``, each with probability ``1/J``."""
    return np.minimum((uniforms(rng, n) * J).astype(np.int64), J - 1) + 1
