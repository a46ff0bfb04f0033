"""Portable seeded PRNG for dataset splits.

The generator is xorshift64* (Vigna 2016) with its state initialised by one
round of SplitMix64, so any language with 64-bit unsigned arithmetic can
reproduce the same splits:

    state = splitmix64(seed)           # 0 is remapped to 0x9E3779B97F4A7C15
    next():  x ^= x >> 12; x ^= x << 25; x ^= x >> 27
             return (x * 0x2545F4914F6CDD1D) mod 2**64
    below(n): draw r until r < 2**64 - (2**64 mod n); return r mod n
    shuffle:  Fisher-Yates, for i = n-1 down to 1: swap(i, below(i + 1))

``spawn(key)`` derives an independent child stream from ``(seed, key)``.
"""

from __future__ import annotations

from typing import MutableSequence

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = splitmix64(self.seed) or GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: MutableSequence) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self, key: int) -> XorShift64Star:
        return XorShift64Star(splitmix64(self.seed ^ splitmix64(key & MASK64)))
