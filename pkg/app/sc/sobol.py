"""Index-addressable Sobol low-discrepancy points.

The points serve as comparator thresholds when values are encoded into
stochastic bit-streams. Dimension 0 is the base-2 van der Corput sequence;
dimensions 1..63 use the first rows of the Joe-Kuo ``new-joe-kuo-6.21201``
direction-number table (primitive polynomial degree ``s``, coefficient word
``a`` and initial direction integers ``m_1..m_s``).

Point ``i`` of a dimension is computed directly from the Gray code of ``i``
so there is no iterator state: any index can be queried in any order, from
any thread, with identical results.
"""

from typing import List, Tuple

import numpy as np
from loguru import logger

from app.utils.errors import BoundsError, ConfigurationError

MAX_BITS = 32
MAX_DIMENSIONS = 64

# (s, a, m_1..m_s) for Joe-Kuo dimensions 2..64; dimension 1 of the table is
# van der Corput and is generated directly.
JOE_KUO_DIRECTIONS: List[Tuple[int, int, Tuple[int, ...]]] = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
    (7, 7, (1, 1, 3, 13, 7, 35, 63)),
    (7, 8, (1, 3, 5, 9, 1, 25, 53)),
    (7, 14, (1, 3, 1, 13, 9, 35, 107)),
    (7, 19, (1, 3, 1, 5, 27, 61, 31)),
    (7, 21, (1, 1, 5, 11, 19, 41, 61)),
    (7, 28, (1, 3, 5, 3, 3, 13, 69)),
    (7, 31, (1, 1, 7, 13, 1, 19, 1)),
    (7, 32, (1, 3, 7, 5, 13, 19, 59)),
    (7, 37, (1, 1, 3, 9, 25, 29, 41)),
    (7, 41, (1, 3, 5, 13, 23, 1, 55)),
    (7, 42, (1, 3, 7, 3, 13, 59, 17)),
    (7, 50, (1, 3, 1, 3, 5, 53, 69)),
    (7, 55, (1, 1, 5, 5, 23, 33, 13)),
    (7, 56, (1, 1, 7, 7, 1, 61, 123)),
    (7, 59, (1, 1, 7, 9, 13, 61, 49)),
    (7, 62, (1, 3, 3, 5, 3, 55, 33)),
    (8, 14, (1, 3, 1, 15, 31, 13, 49, 245)),
    (8, 21, (1, 3, 5, 15, 31, 59, 63, 97)),
    (8, 22, (1, 3, 1, 11, 11, 11, 77, 249)),
    (8, 38, (1, 3, 1, 11, 27, 43, 71, 9)),
    (8, 47, (1, 1, 7, 15, 21, 11, 81, 45)),
    (8, 49, (1, 3, 7, 3, 25, 31, 65, 79)),
    (8, 50, (1, 3, 1, 1, 19, 11, 3, 205)),
    (8, 52, (1, 1, 5, 9, 19, 21, 29, 157)),
    (8, 56, (1, 3, 7, 11, 1, 33, 89, 185)),
    (8, 67, (1, 3, 3, 3, 15, 9, 79, 71)),
    (8, 70, (1, 3, 7, 11, 15, 39, 119, 27)),
    (8, 84, (1, 1, 3, 1, 11, 31, 97, 225)),
    (8, 97, (1, 1, 1, 3, 23, 43, 57, 177)),
    (8, 103, (1, 3, 7, 7, 17, 17, 37, 71)),
    (8, 115, (1, 3, 1, 5, 27, 63, 123, 213)),
    (8, 122, (1, 1, 3, 5, 11, 43, 53, 133)),
    (9, 8, (1, 3, 5, 5, 29, 17, 47, 173, 479)),
    (9, 13, (1, 3, 3, 11, 3, 1, 109, 9, 69)),
    (9, 16, (1, 1, 1, 5, 17, 39, 23, 5, 343)),
    (9, 22, (1, 3, 1, 5, 25, 15, 31, 103, 499)),
    (9, 25, (1, 1, 1, 11, 11, 17, 63, 105, 183)),
    (9, 44, (1, 1, 5, 11, 9, 29, 97, 231, 363)),
    (9, 47, (1, 1, 5, 15, 19, 45, 41, 7, 383)),
    (9, 52, (1, 3, 7, 7, 31, 19, 83, 137, 221)),
    (9, 55, (1, 1, 1, 3, 23, 15, 111, 223, 83)),
    (9, 59, (1, 1, 5, 13, 31, 15, 55, 25, 161)),
    (9, 62, (1, 1, 3, 13, 25, 47, 39, 87, 257)),
]

_SCALE = float(1 << MAX_BITS)


def _van_der_corput_directions() -> List[int]:
    return [1 << (MAX_BITS - 1 - j) for j in range(MAX_BITS)]


def _joe_kuo_directions(s: int, a: int, m: Tuple[int, ...]) -> List[int]:
    if len(m) != s:
        raise ConfigurationError(f"Direction row expects {s} initial values, got {len(m)}")
    v = [0] * MAX_BITS
    for j in range(s):
        if m[j] % 2 == 0 or m[j] >= (1 << (j + 1)):
            raise ConfigurationError(f"Invalid initial direction integer m_{j + 1}={m[j]}")
        v[j] = m[j] << (MAX_BITS - 1 - j)
    for j in range(s, MAX_BITS):
        v[j] = v[j - s] ^ (v[j - s] >> s)
        for k in range(1, s):
            if (a >> (s - 1 - k)) & 1:
                v[j] ^= v[j - k]
    return v


class SobolGenerator:
    """Immutable multi-dimensional Sobol point source"""

    def __init__(self, num_dimensions: int):
        if not 1 <= num_dimensions <= MAX_DIMENSIONS:
            raise ConfigurationError(
                f"Sobol dimension count must be in [1, {MAX_DIMENSIONS}], got {num_dimensions}"
            )
        rows = [_van_der_corput_directions()]
        for s, a, m in JOE_KUO_DIRECTIONS[: num_dimensions - 1]:
            rows.append(_joe_kuo_directions(s, a, m))

        directions = np.array(rows, dtype=np.uint64)
        if np.any(directions == 0) or np.any(directions >> np.uint64(MAX_BITS)):
            raise ConfigurationError("Direction numbers must be nonzero 32-bit integers")
        directions.setflags(write=False)

        self.num_dimensions = num_dimensions
        self.max_bits = MAX_BITS
        self._directions = directions

    @property
    def direction_numbers(self) -> np.ndarray:
        """Read-only (num_dimensions, max_bits) array of direction integers"""
        return self._directions

    def _check_dimension(self, d: int) -> None:
        if not 0 <= d < self.num_dimensions:
            raise BoundsError(
                f"Sobol dimension {d} out of range for a {self.num_dimensions}-dimensional generator"
            )

    def integer_points(self, d: int, count: int, start: int = 0) -> np.ndarray:
        """Numerators (over 2**32) of points start..start+count-1 of dimension d"""
        self._check_dimension(d)
        if start < 0 or count < 0:
            raise BoundsError(f"Point indices must be non-negative (start={start}, count={count})")
        if start + count > (1 << MAX_BITS):
            raise BoundsError(f"Point index exceeds the {MAX_BITS}-bit sequence period")

        index = np.arange(start, start + count, dtype=np.uint64)
        gray = index ^ (index >> np.uint64(1))
        acc = np.zeros(count, dtype=np.uint64)
        for j, v in enumerate(self._directions[d]):
            bit = (gray >> np.uint64(j)) & np.uint64(1)
            acc ^= bit * v
        return acc

    def points(self, d: int, count: int, start: int = 0) -> np.ndarray:
        """Points start..start+count-1 of dimension d as float64 values in [0, 1)"""
        return self.integer_points(d, count, start).astype(np.float64) / _SCALE

    def point(self, d: int, i: int) -> float:
        """The i-th point of dimension d; point(d, 0) == 0.0"""
        return float(self.points(d, 1, start=i)[0])

    def __repr__(self) -> str:
        return f"<SobolGenerator(num_dimensions={self.num_dimensions}, max_bits={self.max_bits})>"


def new_sobol(num_dimensions: int) -> SobolGenerator:
    """Build a generator from the embedded direction-number table"""
    generator = SobolGenerator(num_dimensions)
    logger.debug(f"Initialized Sobol generator with {num_dimensions} dimensions")
    return generator
