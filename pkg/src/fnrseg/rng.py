"""Pinned pseudo-random generation.

All randomness in the package goes through :class:`Xoshiro256` seeded from
:func:`derive_seed`, so datasets, splits and reports are reproducible
bit for bit on any platform.
"""

import numpy as np

from . import _backend

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z):
    """SplitMix64 output finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed, index):
    """Seed for stream ``index`` under ``master_seed``.

    ``mix(master ^ (index * GOLDEN_GAMMA))`` taken modulo 2**64.
    """
    return splitmix64_mix((master_seed & MASK64) ^ ((index * GOLDEN_GAMMA) & MASK64))


def _expand_seed(seed):
    # standard xoshiro seeding: four consecutive SplitMix64 outputs
    state = []
    x = seed & MASK64
    for _ in range(4):
        x = (x + GOLDEN_GAMMA) & MASK64
        state.append(splitmix64_mix(x))
    return state


class Xoshiro256:
    """xoshiro256** generator with a uint64[4] state buffer.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64 and expanded with SplitMix64.
    """

    def __init__(self, seed):
        self.seed = seed & MASK64
        self.state = np.array(_expand_seed(self.seed), dtype=np.uint64)

    def next_u64(self, n):
        out = np.empty(n, dtype=np.uint64)
        _backend.kernel("xoshiro_fill_u64")(self.state, out)
        return out

    def random(self, n):
        """``n`` doubles in [0, 1) built from the top 53 bits of each draw."""
        out = np.empty(n, dtype=np.float64)
        _backend.kernel("xoshiro_fill_uniform")(self.state, out)
        return out

    def uniform(self, low, high, n):
        return low + (high - low) * self.random(n)

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)`` (descending swap index)."""
        return _backend.kernel("xoshiro_permutation")(self.state, n)
