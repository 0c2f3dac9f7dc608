"""Deterministic pseudo-random generator used for splits and synthesis.

A splitmix64 generator (Steele, Lea & Flood's published constants). Chosen over
``random.Random`` so that dataset splits and synthetic corpora are reproducible
bit-for-bit across implementations and Python versions.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit splitmix64 stream seeded with an unsigned integer."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX_1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_2) & _MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift bound trick."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def next_gauss(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Standard Box-Muller draw (no caching, so the stream stays simple)."""
        u1 = self.next_double()
        while u1 <= 0.0:
            u1 = self.next_double()
        u2 = self.next_double()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + std * z

    def choice_weighted(self, items: tuple, weights: tuple) -> object:
        """Pick one item with probability proportional to its weight."""
        total = sum(weights)
        u = self.next_double() * total
        acc = 0.0
        for item, w in zip(items, weights):
            acc += w
            if u < acc:
                return item
        return items[-1]
