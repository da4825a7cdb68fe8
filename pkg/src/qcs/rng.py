"""Pinned pseudo-random streams.

Every stochastic quantity in this package flows through one fixed generator
so that any artifact (matrix, signal, experiment grid) is reproducible from
its 64-bit seed alone.  The stream is defined as:

* bit source: xoshiro256** (Blackman & Vigna), state seeded by iterating
  SplitMix64 from the user seed;
* uniforms on [0, 1): the top 53 bits of each 64-bit word,
  ``(word >> 11) * 2**-53``;
* standard normals: polar Box-Muller on consecutive uniform pairs; each
  accepted pair yields two normals, consumed first-then-second;
* bounded integers: rejection sampling on raw 64-bit words (no modulo bias);
* random ``k``-subsets of ``range(n)``: Fisher-Yates prefix.

Matrix entries are always drawn row-major; quaternion entries are drawn in
component order ``a, b, c, d``.
"""

import math

import numpy as np

_MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix_finalize(z):
    """The SplitMix64 output scrambler; a bijection on 64-bit words."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with the draw conventions documented in the module docstring."""

    def __init__(self, seed):
        seed = int(seed) & _MASK64
        state = []
        acc = seed
        for _ in range(4):
            acc = (acc + GOLDEN_GAMMA) & _MASK64
            state.append(splitmix_finalize(acc))
        if not any(state):
            state[0] = GOLDEN_GAMMA
        self._s = state
        self._spare_normal = None

    def next_raw(self):
        """Next 64-bit word of the stream."""
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_raw() >> 11) * 1.1102230246251565e-16  # 2**-53

    def normal(self):
        """Standard normal deviate (polar Box-Muller)."""
        if self._spare_normal is not None:
            value = self._spare_normal
            self._spare_normal = None
            return value
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        f = math.sqrt(-2.0 * math.log(s) / s)
        self._spare_normal = v * f
        return u * f

    def normals(self, count):
        """Array of `count` consecutive standard normals."""
        return np.array([self.normal() for _ in range(count)])

    def below(self, bound):
        """Uniform integer in [0, bound) by rejection on the raw stream."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            word = self.next_raw()
            if word < limit:
                return word % bound

    def subset(self, n, k):
        """Fisher-Yates prefix: k distinct indices from range(n), order as drawn."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
