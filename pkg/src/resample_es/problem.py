"""Noisy sphere objectives whose noise shrinks near the optimum.

    f(x, w) = ||x - x*||^p + ||x - x*||^(p z / 2) * eta(w)

``z = 0`` gives additive noise, ``z = 2`` multiplicative noise, and
``z > 2`` makes the noise vanish faster than the fitness itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .exceptions import DimensionError, InvalidParameterError
from .rng import Stream

__all__ = [
    "NOISE_KINDS",
    "ProblemSpec",
    "expected_fitness",
    "sample_fitness",
    "averaged_fitness",
    "safe_norm",
    "power_of_two_scale",
]

NOISE_KINDS = ("gaussian", "uniform", "zero")


@dataclass(frozen=True)
class ProblemSpec:
    """Noisy sphere problem.

    Parameters
    ----------
    d : int
        Search-space dimension.
    p : int
        Fitness exponent.
    z : float
        Noise exponent; the noise standard deviation scales as
        ``||x - x*||^(p z / 2)``.
    noise : {"gaussian", "uniform", "zero"}
        Distribution of ``eta``. ``uniform`` draws from
        ``[-noise_scale, noise_scale]``.
    noise_scale : float
        Half-width of the uniform noise; ignored for the other kinds.
    optimum : array-like, optional
        Location of x*. Defaults to the origin.
    """

    d: int
    p: int = 2
    z: float = 2.1
    noise: str = "gaussian"
    noise_scale: float = 1.0
    optimum: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameterError(f"d must be a positive integer, got {self.d}")
        if int(self.p) != self.p or self.p < 1:
            raise InvalidParameterError(f"p must be a positive integer, got {self.p}")
        if not self.z >= 0:
            raise InvalidParameterError(f"z must be >= 0, got {self.z}")
        if self.noise not in NOISE_KINDS:
            raise InvalidParameterError(
                f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.noise == "uniform" and not self.noise_scale > 0:
            raise InvalidParameterError("uniform noise needs noise_scale > 0")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "z", float(self.z))
        if self.optimum is not None:
            opt = tuple(float(v) for v in np.ravel(self.optimum))
            if len(opt) != self.d:
                raise DimensionError(f"optimum has length {len(opt)}, expected {self.d}")
            object.__setattr__(self, "optimum", opt)

    @property
    def x_star(self) -> np.ndarray:
        return self._x_star.copy()

    @cached_property
    def _x_star(self) -> np.ndarray:
        if self.optimum is None:
            return np.zeros(self.d)
        return np.asarray(self.optimum, dtype=float)

    @property
    def noise_variance(self) -> float:
        if self.noise == "gaussian":
            return 1.0
        if self.noise == "uniform":
            return self.noise_scale**2 / 3.0
        return 0.0

    def draw_noise(self, stream: Stream, shape) -> np.ndarray:
        """Draw ``eta`` values; always consumes ``prod(shape)`` variates."""
        if self.noise == "uniform":
            return stream.uniforms(-self.noise_scale, self.noise_scale, shape)
        eta = stream.gaussians(shape)
        if self.noise == "zero":
            eta = np.zeros_like(eta)
        return eta

    def offset(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise DimensionError(f"point has shape {x.shape}, expected trailing dimension {self.d}")
        return x - self._x_star

    def scaled_values(self, X, eta, scale=1.0):
        """Distances and fitness parts of rows of ``X``, in units of ``scale``.

        Returns ``(r, true, noise)`` with ``r = ||x - x*|| / scale`` and the
        true and noise parts of the fitness divided by ``scale**p``.

        ``eta`` holds one row of raw noise draws per point; the noise part
        is the row mean times the distance factor. Dividing by a common
        positive constant preserves every comparison between points while
        keeping values representable when ``||x - x*||`` approaches the
        underflow range.
        """
        v = self.offset(X)
        if scale != 1.0:
            v = v / scale
        r = np.sqrt(np.einsum("...i,...i->...", v, v))
        true, noise = self.fitness_parts(r, eta, scale)
        return r, true, noise

    def fitness_parts(self, r, eta, scale=1.0):
        """True and noise fitness parts for distances ``r`` given in units of ``scale``."""
        true = r**self.p
        if self.noise == "zero":
            return true, np.zeros_like(true)
        gain = scale ** (self.p * (self.z / 2.0 - 1.0))
        eta = np.asarray(eta)
        noise = (gain / eta.shape[-1]) * r ** (self.p * self.z / 2.0) * eta.sum(axis=-1)
        return true, noise


def safe_norm(v) -> np.ndarray:
    """Euclidean norm along the last axis without underflow of the squares."""
    v = np.asarray(v, dtype=float)
    m = np.max(np.abs(v), axis=-1, keepdims=True)
    safe_m = np.where(m > 0, m, 1.0)
    return np.sqrt(np.sum((v / safe_m) ** 2, axis=-1)) * m[..., 0]


def expected_fitness(spec: ProblemSpec, x) -> float:
    """Noise-free fitness ``||x - x*||^p``."""
    return float(safe_norm(spec.offset(x)) ** spec.p)


def sample_fitness(spec: ProblemSpec, x, stream: Stream) -> float:
    """One noisy evaluation at ``x``; consumes one noise draw."""
    return averaged_fitness(spec, x, 1, stream)


def averaged_fitness(spec: ProblemSpec, x, Y: int, stream: Stream) -> float:
    """Mean of ``Y`` independent noisy evaluations at ``x``.

    Consumes exactly ``Y`` noise draws from ``stream``.
    """
    if int(Y) != Y or Y < 1:
        raise InvalidParameterError(f"Y must be a positive integer, got {Y}")
    x = np.asarray(x, dtype=float)
    scale = power_of_two_scale(float(safe_norm(spec.offset(x))))
    eta = spec.draw_noise(stream, (int(Y),))
    _, true, noise = spec.scaled_values(x, eta, scale)
    return float(true + noise) * scale**spec.p


def power_of_two_scale(dist: float) -> float:
    """Power of two close to ``dist`` (1.0 for zero or non-finite input).

    Dividing by it is exact in binary floating point, so it can normalise
    coordinates before squaring without adding rounding error.
    """
    if not dist > 0 or not math.isfinite(dist):
        return 1.0
    return math.ldexp(1.0, math.frexp(dist)[1])
