"""Deterministic, platform-independent random number generation.

SplitMix64 with explicit 64-bit wrapping arithmetic, so the same seed
produces the same stream on every platform and in every language that
implements the same constants. Used for dataset generation and for
parameter initialization; nothing in the package touches global RNG
state.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def child_seed(master_seed: int, index: int) -> int:
    """Derive a stream-independent child seed, e.g. one per scene."""
    return _mix((master_seed ^ ((index + 1) * _GOLDEN)) & _MASK)


class SplitMix64:
    """Counter-based 64-bit generator with uniform/gaussian helpers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        # 53 random bits, the full double mantissa
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        return [self.uniform(lo, hi) for _ in range(n)]

    def gauss(self) -> float:
        """Standard normal via Box-Muller (one value per pair of uniforms)."""
        u1 = self.uniform()
        while u1 <= 1e-300:
            u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def gausses(self, n: int) -> list[float]:
        return [self.gauss() for _ in range(n)]

    def unit_vector3(self) -> tuple[float, float, float]:
        """Uniform direction on the unit sphere."""
        while True:
            x, y, z = self.gauss(), self.gauss(), self.gauss()
            n = math.sqrt(x * x + y * y + z * z)
            if n > 1e-12:
                return (x / n, y / n, z / n)

    def split(self) -> "SplitMix64":
        """Fork an independent child generator."""
        return SplitMix64(_mix(self.next_u64() ^ _GOLDEN))
