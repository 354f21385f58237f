"""Portable xoshiro256** generator with splitmix64 seeding.

The synthetic dataset is defined in terms of this generator so that any
implementation can reproduce it bit for bit.
"""
from __future__ import annotations

from typing import Sequence, TypeVar

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
STREAM_MIX = 0xD1B54A32D192ED03

T = TypeVar("T")


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


class Xoshiro256:
    def __init__(self, seed: int) -> None:
        mixer = SplitMix64(seed)
        self.state = [mixer.next() for _ in range(4)]

    @classmethod
    def for_stream(cls, seed: int, stream: int) -> "Xoshiro256":
        """Independent generator for item ``stream`` of a seeded collection."""

        return cls((seed ^ (stream * STREAM_MIX)) & MASK64)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.state
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""

        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in the inclusive range [low, high]."""

        if high < low:
            raise ValueError(f"rng: empty range [{low}, {high}]")
        return low + int(self.random() * (high - low + 1))

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("rng: cannot choose from an empty sequence")
        return items[self.integers(0, len(items) - 1)]


__all__ = ["SplitMix64", "Xoshiro256"]
