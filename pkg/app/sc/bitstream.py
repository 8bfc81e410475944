"""Unipolar stochastic bit-streams.

A value p in [0, 1] is encoded as N bits whose fraction of ones approximates
p. Bit i is 1 iff the i-th Sobol point of the chosen dimension is strictly
below p, so encode(0) is all zeros and encode(1) is all ones. Two streams
built from different Sobol dimensions multiply with a bitwise AND.

Bits are packed little-endian into uint64 words: bit i lives in word i // 64
at position i % 64, and positions past ``length_bits`` in the last word are
always zero.
"""

import math
from functools import lru_cache
from typing import Iterable

import numpy as np

from app.sc.sobol import SobolGenerator
from app.utils.errors import DomainError, UsageError

WORD_BITS = 64

ACTIVATION_DIM = 0
WEIGHT_DIM = 1

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def popcount64(words: np.ndarray) -> np.ndarray:
    """Per-word population count of a uint64 array (SWAR reduction)"""
    x = np.asarray(words, dtype=np.uint64)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


def _words_for(length_bits: int) -> int:
    return math.ceil(length_bits / WORD_BITS)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (..., N) boolean array into (..., ceil(N / 64)) uint64 words"""
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[-1]
    padded = np.zeros(bits.shape[:-1] + (_words_for(n) * WORD_BITS,), dtype=bool)
    padded[..., :n] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


class BitStream:
    """Immutable packed stream of ``length_bits`` bits"""

    __slots__ = ("words", "length_bits")

    def __init__(self, words: np.ndarray, length_bits: int):
        if length_bits < 1:
            raise UsageError(f"Bit-stream length must be positive, got {length_bits}")
        words = np.array(words, dtype=np.uint64).reshape(-1)
        if words.size != _words_for(length_bits):
            raise UsageError(
                f"{length_bits} bits need {_words_for(length_bits)} words, got {words.size}"
            )
        tail = length_bits % WORD_BITS
        if tail and words[-1] >> np.uint64(tail):
            raise UsageError("Bits beyond length_bits must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "length_bits", length_bits)

    def __setattr__(self, name, value):
        raise AttributeError("BitStream is immutable")

    @classmethod
    def from_bits(cls, bits: Iterable[bool]) -> "BitStream":
        if isinstance(bits, np.ndarray):
            bits = bits.astype(bool).reshape(-1)
        else:
            bits = np.fromiter(bits, dtype=bool)
        return cls(pack_bits(bits), bits.size)

    @classmethod
    def zeros(cls, length_bits: int) -> "BitStream":
        return cls(np.zeros(_words_for(length_bits), dtype=np.uint64), length_bits)

    @classmethod
    def ones(cls, length_bits: int) -> "BitStream":
        return cls.from_bits(np.ones(length_bits, dtype=bool))

    def bits(self) -> np.ndarray:
        """Unpacked bits as a bool array, bit 0 first"""
        raw = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return raw[: self.length_bits].astype(bool)

    def popcount(self) -> int:
        return int(popcount64(self.words).sum())

    def __len__(self) -> int:
        return self.length_bits

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.length_bits == other.length_bits and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.length_bits, self.words.tobytes()))

    def __str__(self) -> str:
        # most significant position first
        return "".join("1" if b else "0" for b in self.bits()[::-1])

    def __repr__(self) -> str:
        return f"<BitStream(length_bits={self.length_bits}, ones={self.popcount()})>"


def encode(p: float, d: int, n: int, gen: SobolGenerator) -> BitStream:
    """Comparator encoding: bit i = [gen.point(d, i) < p]"""
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise DomainError(f"Value {p} is outside [0, 1]; normalize before encoding")
    if n < 1:
        raise UsageError(f"Bit-stream length must be positive, got {n}")
    thresholds = gen.points(d, n)
    return BitStream(pack_bits(thresholds < p), n)


def decode(s: BitStream) -> float:
    return s.popcount() / s.length_bits


def and_multiply(a: BitStream, b: BitStream) -> BitStream:
    if a.length_bits != b.length_bits:
        raise UsageError(
            f"Cannot AND streams of different lengths ({a.length_bits} vs {b.length_bits})"
        )
    return BitStream(a.words & b.words, a.length_bits)


def multiply_scalar(x: float, w: float, n: int, gen: SobolGenerator) -> float:
    """encode -> AND -> decode with x on the activation dimension and w on the weight dimension"""
    return decode(and_multiply(encode(x, ACTIVATION_DIM, n, gen), encode(w, WEIGHT_DIM, n, gen)))


class ProductTable:
    """AND-popcount of every pair of encodable streams of one length.

    A stream produced by ``encode(p, d, n)`` depends on p only through its
    level k = #{i < n : point(d, i) < p}, which ranges over 0..n. The table
    holds ``popcount(level_a & level_w)`` for every level pair, so a stochastic
    product reduces to two ``searchsorted`` calls and a lookup that returns
    exactly what the packed AND would.
    """

    def __init__(
        self,
        gen: SobolGenerator,
        bitstream_len: int,
        activation_dim: int = ACTIVATION_DIM,
        weight_dim: int = WEIGHT_DIM,
    ):
        if activation_dim == weight_dim:
            raise UsageError("Activation and weight streams need distinct Sobol dimensions")
        self.bitstream_len = bitstream_len
        self.activation_dim = activation_dim
        self.weight_dim = weight_dim

        points_a = gen.points(activation_dim, bitstream_len)
        points_w = gen.points(weight_dim, bitstream_len)
        self._thresholds_a = np.sort(points_a)
        self._thresholds_w = np.sort(points_w)

        levels_a = self._level_streams(points_a)
        levels_w = self._level_streams(points_w)
        counts = np.empty((bitstream_len + 1, bitstream_len + 1), dtype=np.int32)
        for k, row in enumerate(levels_a):
            counts[k] = popcount64(row[None, :] & levels_w).sum(axis=1)
        counts.setflags(write=False)
        self.counts = counts

    @staticmethod
    def _level_streams(points: np.ndarray) -> np.ndarray:
        # level k sets the bits of the k smallest points
        rank = np.empty(points.size, dtype=np.int64)
        rank[np.argsort(points, kind="stable")] = np.arange(points.size)
        levels = np.arange(points.size + 1)[:, None]
        return pack_bits(rank[None, :] < levels)

    def activation_levels(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._thresholds_a, values, side="left")

    def weight_levels(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._thresholds_w, values, side="left")

    def decode(self, activation_levels: np.ndarray, weight_levels: np.ndarray) -> np.ndarray:
        """Decoded AND products for broadcastable level arrays"""
        return self.counts[activation_levels, weight_levels] / self.bitstream_len


@lru_cache(maxsize=16)
def product_table(
    gen: SobolGenerator,
    bitstream_len: int,
    activation_dim: int = ACTIVATION_DIM,
    weight_dim: int = WEIGHT_DIM,
) -> ProductTable:
    return ProductTable(gen, bitstream_len, activation_dim, weight_dim)
