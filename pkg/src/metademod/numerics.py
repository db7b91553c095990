"""Seeded random streams, complex Gaussian sampling and the Gaussian tail function."""

import math

import numpy as np


def rng_stream(seed, *stream):
    """Create an independent, reproducible random generator.

    Identical (seed, stream) always yields the same sample sequence; distinct
    stream ids give statistically independent streams. Built on the Philox
    counter-based generator so per-device / per-trial streams can be created
    cheaply and used in parallel workers.

    Parameters:
        seed   : base seed (non-negative int)
        stream : zero or more non-negative ints identifying the substream

    Returns:
        np.random.Generator
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


def q_function(x):
    """Standard Gaussian tail probability P(Z > x), Z ~ N(0, 1).

    Uses the complementary error function, accurate to double precision:
    Q(x) = erfc(x / sqrt(2)) / 2.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"q_function requires finite input, got {x}")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def sample_cgaussian(rng, variance, size=None):
    """Draw circularly-symmetric complex Gaussian noise CN(0, variance).

    Real and imaginary parts are independent N(0, variance/2), so the total
    second moment E[|z|^2] equals `variance`. With size=None a single complex
    scalar is returned, otherwise an array of the given shape. The two
    components of each sample are drawn adjacently from the stream, so the
    first n samples of a longer batch equal an n-sample batch from the same
    stream state.
    """
    if variance < 0:
        raise ValueError(f"noise variance must be >= 0, got {variance}")
    std = math.sqrt(variance / 2.0)
    if size is None:
        re, im = rng.normal(0.0, std, size=2)
        return complex(re + 1j * im)
    shape = (size,) if np.isscalar(size) else tuple(size)
    parts = rng.normal(0.0, std, size=(math.prod(shape), 2))
    return (parts[:, 0] + 1j * parts[:, 1]).reshape(shape)
