"""Reproducible Gaussian streams with hierarchical seeding.

Every stream is identified by a master seed and a path of non-negative
integers (run index, role, ...). The pair is hashed into an independent
child seed with :class:`numpy.random.SeedSequence`, so sibling streams
share no state and any stream can be rebuilt in isolation, e.g. in a
worker process.

Generation method: PCG64 bit generator, standard normals by numpy's
ziggurat (``Generator.standard_normal``). Array draws fill values in
C order from the same sequence as repeated scalar draws, which is what
lets :class:`DrawBuffer` prefetch blocks without changing a trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "SeedSpec",
    "Stream",
    "DrawBuffer",
    "gaussian_scalar",
    "gaussian_vector",
    "ROLE_SIGMA",
    "ROLE_X",
    "ROLE_NOISE",
]

# Draw roles used as the last stream_path component of a run.
ROLE_SIGMA = 0
ROLE_X = 1
ROLE_NOISE = 2

_U64 = 2**64


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a path naming one stream in the hierarchy."""

    master_seed: int
    stream_path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _U64:
            raise InvalidParameterError(
                f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        path = tuple(int(k) for k in self.stream_path)
        if any(k < 0 for k in path):
            raise InvalidParameterError(f"stream_path entries must be >= 0, got {path}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_path", path)

    def child(self, *path: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_path + tuple(path))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=self.stream_path)

    def stream(self) -> "Stream":
        return Stream(self)


@dataclass
class Stream:
    """Single-owner source of variates derived from a :class:`SeedSpec`.

    ``consumed`` counts the variates handed out so far.
    """

    seed: SeedSpec
    consumed: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.PCG64(self.seed.seed_sequence()))

    def gaussian(self) -> float:
        self.consumed += 1
        return float(self._gen.standard_normal())

    def gaussian_vector(self, d: int) -> np.ndarray:
        if int(d) < 1:
            raise InvalidParameterError(f"dimension must be >= 1, got {d}")
        self.consumed += int(d)
        return self._gen.standard_normal(int(d))

    def gaussians(self, shape) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.consumed += out.size
        return out

    def uniforms(self, low: float, high: float, shape) -> np.ndarray:
        out = self._gen.uniform(low, high, shape)
        self.consumed += out.size
        return out


def gaussian_scalar(stream: Stream) -> float:
    """One standard normal variate; advances ``stream`` by one."""
    return stream.gaussian()


def gaussian_vector(stream: Stream, d: int) -> np.ndarray:
    """``d`` independent standard normal coordinates from ``stream``."""
    return stream.gaussian_vector(d)


class DrawBuffer:
    """Serves fixed-shape rows of variates from block prefetches.

    ``take()`` returns the same values, in the same order, as calling
    ``sampler(stream, row_shape)`` once per row would; prefetching only
    amortises the per-call overhead in tight loops.
    """

    def __init__(self, stream: Stream, row_shape: Sequence[int],
                 sampler: Callable[[Stream, tuple], np.ndarray] | None = None,
                 block_rows: int = 512):
        self.stream = stream
        self.row_shape = tuple(int(s) for s in row_shape)
        self.sampler = sampler or (lambda s, shape: s.gaussians(shape))
        self.block_rows = int(block_rows)
        self._block = None
        self._pos = 0

    def take(self) -> np.ndarray:
        if self._block is None or self._pos >= len(self._block):
            self._block = self.sampler(self.stream, (self.block_rows,) + self.row_shape)
            self._pos = 0
        row = self._block[self._pos]
        self._pos += 1
        return row
