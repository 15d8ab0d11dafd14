"""Portable 64-bit random number generator (splitmix64).

Seeded forest fits must reproduce bit-for-bit across platforms and across
serial/parallel execution, so the tree builder cannot depend on any
library's generator internals. This is the splitmix64 sequence (Steele,
Lea & Flood's SplittableRandom finalizer): one additive 64-bit counter
pushed through an avalanche mix. Doubles come from the top 53 bits.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; avalanche-mixes a 64-bit value."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed from a parent seed and integer keys.

    Used to give every tree (and every ramp-up point) an independent
    stream so parallel and serial execution produce identical results.
    """
    state = mix64(seed & _MASK)
    for key in keys:
        state = mix64(state ^ mix64(key & _MASK))
    return state


class SplitMix64:
    """Minimal generator: uniform doubles, bounded ints, subsampling."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return int(self.uniform() * n)

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), via partial Fisher-Yates."""
        if k > n:
            raise ValueError("cannot sample more indices than available")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
