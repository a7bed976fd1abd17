"""Deterministic counter-based random number generation.

The benchmark harness must reproduce the same sample streams bit-for-bit
across platforms and releases, so this module fixes the generator rather
than delegating to a library default.  The generator is SplitMix64:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z      <- state
    z      <- ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      <- ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output <- z XOR (z >> 31)

Uniform doubles take the top 53 bits of the output word,
``(output >> 11) * 2**-53``, giving values in [0, 1).  Box sampling maps
those draws affinely onto [lo, hi].  Gaussian samples use the Box-Muller
transform on consecutive uniform pairs; a zero first draw is redrawn so
the logarithm stays finite.  Arrays are always filled row-major.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_WEYL = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)


class SplitMix64:
    """Sequential SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _WEYL) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform draw in [0, 1) with 53 mantissa bits."""
        return (self.next_u64() >> 11) / _TWO53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def uniform_box(self, lower, upper, count: int) -> np.ndarray:
        """Sample `count` points uniformly in the box [lower, upper].

        Returns a (count, n) array; draw index ``r * n + j`` feeds row r,
        coordinate j, so the stream layout is part of the contract.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.shape[0]
        u = np.empty(count * n)
        for i in range(count * n):
            u[i] = self.next_float()
        return lower + (upper - lower) * u.reshape(count, n)

    def normal(self, count: int) -> np.ndarray:
        """`count` standard normal draws via Box-Muller pairs.

        For an odd count the spare sine variate of the last pair is
        discarded.
        """
        out = np.empty(count)
        i = 0
        while i < count:
            u1 = self.next_float()
            while u1 == 0.0:
                u1 = self.next_float()
            u2 = self.next_float()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < count:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
            i += 2
        return out
