"""Multiplication-error sweeps and Sobol/bit-stream dumps for the tool commands."""

import io
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from loguru import logger

from app.sc.bitstream import encode, multiply_scalar
from app.sc.sobol import SobolGenerator, new_sobol
from app.utils.errors import UsageError
from app.utils.rng import make_rng


@dataclass(frozen=True)
class BenchResult:
    n: int
    pairs: int
    max_error: float
    mean_error: float

    def line(self) -> str:
        return f"n={self.n} pairs={self.pairs} max_error={self.max_error:.6f} mean_error={self.mean_error:.6f}"


def sc_bench(lengths: Iterable[int], pairs: int, seed: int, gen: Optional[SobolGenerator] = None) -> List[BenchResult]:
    """|multiply_scalar(x, w) - x*w| over seeded uniform pairs, for every length"""
    if pairs < 1:
        raise UsageError(f"pairs must be positive, got {pairs}")
    gen = gen or new_sobol(2)
    operands = make_rng(seed, "bench").random((pairs, 2))

    results = []
    for n in lengths:
        errors = np.array([abs(multiply_scalar(x, w, n, gen) - x * w) for x, w in operands])
        result = BenchResult(n=n, pairs=pairs, max_error=float(errors.max()), mean_error=float(errors.mean()))
        logger.debug(f"sc-bench {result.line()}")
        results.append(result)
    return results


def sobol_csv(count: int, dims: int) -> str:
    """``index,d0,d1,...`` rows for the first ``count`` points"""
    gen = new_sobol(dims)
    columns = np.stack([gen.points(d, count) for d in range(dims)], axis=1)

    buffer = io.StringIO()
    buffer.write(",".join(["index"] + [f"d{d}" for d in range(dims)]) + "\n")
    for i, row in enumerate(columns):
        buffer.write(",".join([str(i)] + [repr(float(v)) for v in row]) + "\n")
    return buffer.getvalue()


def encoded_streams(value: float, count: int, dims: int) -> str:
    """The ``count``-bit encoding of ``value`` on each dimension, most significant bit first"""
    gen = new_sobol(dims)
    lines = []
    for d in range(dims):
        stream = encode(value, d, count, gen)
        lines.append(f"d{d} {stream} ones={stream.popcount()}")
    return "\n".join(lines) + "\n"
