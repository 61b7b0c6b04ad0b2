"""SplitMix64 generator and tagged substreams.

Every random draw in the package goes through this module so that results are
identical across platforms and numpy versions.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z):
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _fnv1a64(text):
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


class SplitMix64:
    def __init__(self, seed=0):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self):
        """Uniform real in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n):
        """Uniform integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)

    def uniform_array(self, shape):
        """Vectorised equivalent of repeated ``uniform()`` calls (same stream, same order)."""
        n = int(np.prod(shape, dtype=np.int64))
        if n == 0:
            return np.zeros(shape)
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN) & MASK64
        return ((z >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(shape)

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def substream(seed, *tags):
    """Independent generator for ``seed`` mixed with one or more purpose tags."""
    state = int(seed) & MASK64
    for tag in tags:
        state = mix64((state ^ _fnv1a64(str(tag))) & MASK64)
    return SplitMix64(state)


def glorot_uniform(shape, seed, tag, fan_in=None, fan_out=None):
    """Glorot-uniform draw; fans default to the last two axes of ``shape``."""
    if fan_in is None:
        fan_in, fan_out = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    u = substream(seed, tag).uniform_array(shape)
    return (2.0 * u - 1.0) * limit
