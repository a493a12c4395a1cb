"""Seeded random streams with a documented draw order.

Core generator is xorshift64* seeded through one splitmix64 mix, so the
stream is fully specified by a 64-bit seed and reproducible across
platforms. Per-sample streams come from `spawn`: the parent seed XOR the
sample index, pushed through a splitmix64 step.

Draw conventions (consumed in this exact order everywhere):
  - uniform():  53-bit mantissa of the next 64-bit word, in [0, 1).
  - randint(lo, hi): lo + floor(uniform() * (hi - lo + 1)), inclusive.
  - normal(): Box-Muller; each pair of uniforms yields two normals, the
    second is cached and returned by the next call.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One output of the splitmix64 sequence started at state x."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _splitmix64_block(seed: int, count: int) -> np.ndarray:
    """Vectorized splitmix64 outputs for states seed + GOLDEN*(1..count)."""
    with np.errstate(over="ignore"):
        x = np.uint64(seed) + np.uint64(_GOLDEN) * np.arange(1, count + 1, dtype=np.uint64)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


class Rng:
    """xorshift64* stream over a 64-bit state (never zero)."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._state = splitmix64(self.seed) or 0x9E3779B97F4A7C15
        self._spare_normal: float | None = None

    def spawn(self, index: int) -> "Rng":
        """Independent child stream for sample `index`."""
        return Rng(splitmix64((self.seed ^ (index & _MASK)) & _MASK))

    def u64(self) -> int:
        s = self._state
        s ^= (s >> 12)
        s = (s ^ (s << 25)) & _MASK
        s ^= (s >> 27)
        self._state = s
        return (s * 0x2545F4914F6CDD1D) & _MASK

    def uniform(self) -> float:
        return (self.u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + int(self.uniform() * (hi - lo + 1))

    def normal(self) -> float:
        if self._spare_normal is not None:
            z, self._spare_normal = self._spare_normal, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1]: keeps the log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, k: int) -> list[float]:
        return [self.normal() for _ in range(k)]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates using this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def uniform_array(self, shape) -> np.ndarray:
        """Block of uniforms in [0, 1): one core word seeds a counter run.

        The next u64() of this stream becomes the base of a vectorized
        splitmix64 counter sequence, so array draws stay deterministic
        while costing O(1) stream words.
        """
        count = int(np.prod(shape)) if shape else 1
        words = _splitmix64_block(self.u64(), count)
        return ((words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def normal_array(self, shape) -> np.ndarray:
        """Box-Muller on two uniform blocks (cosine branch only)."""
        u1 = 1.0 - self.uniform_array(shape)
        u2 = self.uniform_array(shape)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
