"""Seed derivation for every random stream in the project.

A user seed is expanded with SplitMix64 mixing into one independent seed per
named stream ("init", "shuffle", "bench", ...), and each stream gets its own
PCG64 generator. The same (seed, stream) pair yields the same numbers on any
platform.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One SplitMix64 output for the given 64-bit state"""
    z = (state + _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: str) -> int:
    tag = zlib.crc32(stream.encode("utf-8"))
    return splitmix64((seed & _MASK64) ^ splitmix64(tag))


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent, reproducible generator for one named stream"""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, stream)))
