"""Seeded, platform-stable PRNG used wherever both ends must agree.

Interleaver permutations and training sequences are regenerated
independently by transmitter and receiver, so they cannot depend on
anything with platform- or version-dependent output.  This module
implements xoshiro256** 1.0 (public-domain generator by Blackman and
Vigna) with splitmix64 seed expansion, using nothing but 64-bit integer
arithmetic:

  splitmix64:  z = (x += 0x9E3779B97F4A7C15)
               z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
               z = (z ^ (z >> 27)) * 0x94D049BB133111EB
               return z ^ (z >> 31)

  xoshiro256**: result = rotl(s1 * 5, 7) * 9, then the linear state
               transition with shifts 17/45 as published.

Derived streams:
  * bits(n): each output word yields 64 bits, least-significant first.
  * permutation(n): Fisher-Yates, drawing j = next() % (i + 1).  The
    modulo bias is irrelevant at these sizes and keeping the draw to a
    single well-defined operation makes the algorithm easy to restate.
"""

from functools import lru_cache

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, (z ^ (z >> 31)) & _MASK


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** seeded from a single 64-bit integer via splitmix64."""

    def __init__(self, seed):
        seed &= _MASK
        s = []
        x = seed
        for _ in range(4):
            x, v = _splitmix64(x)
            s.append(v)
        self._s = s

    def next_u64(self):
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def bits(self, n):
        """n pseudorandom bits as a uint8 array, LSB-first per word."""
        out = np.empty(n, dtype=np.uint8)
        i = 0
        while i < n:
            word = self.next_u64()
            take = min(64, n - i)
            for j in range(take):
                out[i + j] = (word >> j) & 1
            i += take
        return out

    def permutation(self, n):
        """Fisher-Yates permutation of range(n) as an int64 index array."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def derive_seed(seed, *tags):
    """Mix integer tags into a seed to get independent streams."""
    x = seed & _MASK
    for tag in tags:
        x, v = _splitmix64(x ^ (tag & _MASK))
        x = v
    return x


@lru_cache(maxsize=64)
def cached_permutation(seed, n):
    """Memoized interleaver permutation (sessions reuse one length)."""
    return Xoshiro256StarStar(seed).permutation(n)
