"""Arcsine and flipped-Arcsine laws for inverse stepsizes and curvatures.

Everything here is parameterized by a :class:`ConditionClass` ``(m, M)``.
Samplers draw from an :class:`RngStream`, a seeded, splittable wrapper
around ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ParameterError",
    "QuadratureSingularityError",
    "ConditionClass",
    "RngStream",
    "ArcsineDist",
    "FlippedArcsineDist",
    "PointMass",
    "UniformDist",
    "chebyshev_angles",
    "arcsine_sample",
    "arcsine_cdf",
    "flipped_sample",
    "expect_quadrature",
    "expect_monte_carlo",
    "deterministic_sum",
]

# Monte Carlo reductions are done in chunks of this many samples.
MC_CHUNK = 1 << 20


class ParameterError(ValueError):
    """Invalid model parameters (e.g. ``m >= M``)."""


class QuadratureSingularityError(ArithmeticError):
    """An integrand evaluated to a non-finite value at a quadrature node."""

    def __init__(self, index: int, node: float, value: float):
        self.index = index
        self.node = node
        self.value = value
        super().__init__(
            f"integrand is {value} at quadrature node #{index} (beta={node!r})"
        )


@dataclass(frozen=True)
class ConditionClass:
    """Strong convexity ``m`` and smoothness ``M`` with ``0 < m < M``."""

    m: float
    M: float

    def __post_init__(self):
        m, M = float(self.m), float(self.M)
        if not (math.isfinite(m) and math.isfinite(M)):
            raise ParameterError(f"m and M must be finite, got m={m}, M={M}")
        if m <= 0:
            raise ParameterError(f"require m > 0, got m={m}")
        if not m < M:
            raise ParameterError(f"require m < M, got m={m}, M={M}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "M", M)

    @classmethod
    def from_kappa(cls, kappa: float) -> "ConditionClass":
        """Normalized class ``m = 1/kappa, M = 1``."""
        kappa = float(kappa)
        if not kappa > 1:
            raise ParameterError(f"require kappa > 1, got kappa={kappa}")
        return cls(1.0 / kappa, 1.0)

    def kappa(self) -> float:
        return self.M / self.m

    def racc(self) -> float:
        """Accelerated contraction factor ``(sqrt(kappa)-1)/(sqrt(kappa)+1)``."""
        s = math.sqrt(self.kappa())
        return (s - 1.0) / (s + 1.0)

    def log_racc(self) -> float:
        return math.log(self.racc())

    @property
    def center(self) -> float:
        return 0.5 * (self.M + self.m)

    @property
    def radius(self) -> float:
        return 0.5 * (self.M - self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "M": self.M}


@dataclass
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Splitting rule: the generator is ``PCG64`` seeded with
    ``SeedSequence(entropy=seed, spawn_key=(stream_id,))``. Distinct
    stream ids therefore give the same independent children that
    ``SeedSequence(seed).spawn`` would produce. :meth:`child` appends a
    further key, so sub-streams of a stream are independent of it too.
    """

    seed: int
    stream_id: int = 0
    _key: tuple = field(default=(), repr=False)
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer, got {v}")
        self.seed = int(self.seed)
        self.stream_id = int(self.stream_id)
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, *self._key)
        )
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def fresh(self) -> "RngStream":
        """Same stream rewound to its first draw."""
        return RngStream(self.seed, self.stream_id, self._key)

    def child(self, key: int) -> "RngStream":
        """Independent sub-stream (used e.g. for gradient noise)."""
        return RngStream(self.seed, self.stream_id, (*self._key, int(key)))

    def uniform(self, size=None):
        return self.generator.random(size)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def chebyshev_angles(n: int) -> np.ndarray:
    """Midpoint angles ``(2t+1)pi/(2n)`` for ``t = 0..n-1``."""
    if n < 1:
        raise ParameterError(f"need at least one node, got {n}")
    return (2.0 * np.arange(n) + 1.0) * (np.pi / (2.0 * n))


def deterministic_sum(values: np.ndarray) -> float:
    """Order-fixed sum: numpy pairwise sums per block, then ``math.fsum``."""
    values = np.ascontiguousarray(values, dtype=float).ravel()
    if values.size <= MC_CHUNK:
        return float(np.sum(values))
    return math.fsum(
        float(np.sum(values[i : i + MC_CHUNK])) for i in range(0, values.size, MC_CHUNK)
    )


class ArcsineDist:
    """Arcsine law on ``(m, M)``: density ``1/(pi sqrt((M-b)(b-m)))``."""

    name = "arcsine"

    def __init__(self, cls: ConditionClass):
        self.cls = cls
        self.c = cls.center
        self.r = cls.radius

    def __repr__(self):
        return f"ArcsineDist(m={self.cls.m}, M={self.cls.M})"

    @property
    def support(self) -> tuple[float, float]:
        return self.cls.m, self.cls.M

    def density(self, beta):
        beta = np.asarray(beta, dtype=float)
        m, M = self.support
        inside = (beta > m) & (beta < M)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = 1.0 / (np.pi * np.sqrt((M - beta) * (beta - m)))
        return np.where(inside, val, 0.0)

    def cdf(self, beta):
        return arcsine_cdf(self, beta)

    def quantile(self, u):
        """Inverse CDF, ``c + r cos(pi (1-u))``."""
        u = np.asarray(u, dtype=float)
        return self.c + self.r * np.cos(np.pi * (1.0 - u))

    def sample(self, rng, size=None):
        """Cosine transform ``c + r cos(pi U)`` of a uniform draw."""
        u = _generator(rng).random(size)
        return self.c + self.r * np.cos(np.pi * u)

    def quadrature(self, nodes: int):
        """Equal-weight Chebyshev nodes; exact for polynomials of degree < 2N."""
        x = self.c + self.r * np.cos(chebyshev_angles(nodes))
        return x, np.full(nodes, 1.0 / nodes)


class FlippedArcsineDist:
    """Law of ``lam`` when ``1/lam ~ Arcsine(1/M, 1/m)``."""

    name = "flipped_arcsine"

    def __init__(self, cls: ConditionClass):
        self.cls = cls
        self.inverse = ArcsineDist(ConditionClass(1.0 / cls.M, 1.0 / cls.m))

    def __repr__(self):
        return f"FlippedArcsineDist(m={self.cls.m}, M={self.cls.M})"

    @property
    def support(self) -> tuple[float, float]:
        return self.cls.m, self.cls.M

    def density(self, lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore"):
            inv = 1.0 / lam
        return self.inverse.density(inv) * inv**2

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore"):
            return 1.0 - arcsine_cdf(self.inverse, 1.0 / lam)

    def sample(self, rng, size=None):
        return 1.0 / self.inverse.sample(rng, size)

    def quadrature(self, nodes: int):
        x, w = self.inverse.quadrature(nodes)
        return 1.0 / x, w


class PointMass:
    name = "point_mass"

    def __init__(self, value: float):
        self.value = float(value)

    def __repr__(self):
        return f"PointMass({self.value})"

    @property
    def support(self):
        return self.value, self.value

    def sample(self, rng, size=None):
        _generator(rng)
        if size is None:
            return self.value
        return np.full(size, self.value)

    def quadrature(self, nodes: int = 1):
        return np.array([self.value]), np.array([1.0])


class UniformDist:
    name = "uniform"

    def __init__(self, low: float, high: float):
        if not low < high:
            raise ParameterError(f"require low < high, got {low}, {high}")
        self.low, self.high = float(low), float(high)

    def __repr__(self):
        return f"UniformDist({self.low}, {self.high})"

    @property
    def support(self):
        return self.low, self.high

    def sample(self, rng, size=None):
        return _generator(rng).uniform(self.low, self.high, size)

    def quadrature(self, nodes: int):
        # composite midpoint rule
        h = (self.high - self.low) / nodes
        x = self.low + h * (np.arange(nodes) + 0.5)
        return x, np.full(nodes, 1.0 / nodes)


def arcsine_sample(d: ArcsineDist, rng) -> float:
    """One inverse stepsize ``beta``; the stepsize is ``1/beta``."""
    return float(d.sample(rng))


def arcsine_cdf(d: ArcsineDist, beta):
    beta = np.asarray(beta, dtype=float)
    m, M = d.support
    arg = np.clip((2.0 * beta - (M + m)) / (M - m), -1.0, 1.0)
    val = 1.0 - np.arccos(arg) / np.pi
    val = np.where(beta <= m, 0.0, np.where(beta >= M, 1.0, val))
    return val[()] if val.ndim == 0 else val


def flipped_sample(d: FlippedArcsineDist, rng) -> float:
    return float(d.sample(rng))


def expect_quadrature(d, g: Callable[[np.ndarray], np.ndarray], nodes: int) -> float:
    """Approximate ``E_d[g]`` with an ``nodes``-point equal-weight rule.

    For :class:`ArcsineDist` the nodes are ``c + r cos((2t+1)pi/(2N))``, the
    inverse stepsizes of the length-``N`` Chebyshev schedule. ``g`` must be
    vectorized. A non-finite value at any node raises
    :class:`QuadratureSingularityError` instead of being clamped.
    """
    x, w = d.quadrature(nodes)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.asarray(g(x), dtype=float)
    vals = np.broadcast_to(vals, x.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureSingularityError(i, float(x[i]), float(vals[i]))
    return deterministic_sum(vals * w)


def expect_monte_carlo(d, g, samples: int, rng, chunk: int = MC_CHUNK):
    """Monte Carlo ``(mean, stderr)`` of ``g(X)``, ``X ~ d``; chunked and order-fixed."""
    gen = _generator(rng)
    total = []
    total_sq = []
    left = int(samples)
    while left > 0:
        k = min(chunk, left)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.asarray(g(d.sample(gen, k)), dtype=float)
        total.append(float(np.sum(v)))
        total_sq.append(float(np.sum(v * v)))
        left -= k
    mean = math.fsum(total) / samples
    var = max(math.fsum(total_sq) / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)
