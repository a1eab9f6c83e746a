"""Logarithmic potentials of the Arcsine laws and the quantities built on them.

The central fact: for ``beta ~ Arcsine(m, M)`` the expected log-factor
``E log|1 - lam/beta|`` equals ``log Racc`` for every ``lam`` in ``[m, M]``,
and grows with ``|z|`` outside, ``z = (2 lam - (M+m)) / (M-m)``. The
flipped law plays the same role with the roles of ``beta`` and ``lam``
swapped.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import (
    MC_CHUNK,
    ArcsineDist,
    ConditionClass,
    FlippedArcsineDist,
    ParameterError,
    _generator,
    deterministic_sum,
    expect_quadrature,
)

__all__ = [
    "VARIANCE_BOUND",
    "equilibrium_potential",
    "equilibrium_potential_closed_form",
    "arcsine_log_potential",
    "rate_value",
    "log_rate_at",
    "flipped_log_rate_at",
    "log_factor",
    "expected_log_factor",
    "EqualizationReport",
    "equalization_residual",
    "SupReport",
    "non_arcsine_is_worse",
    "inexact_slowdown",
    "GamePayoff",
    "game_payoff",
    "factor_variance",
]

# conservative stand-in for the sup over lam of Var log|1 - lam/beta|
VARIANCE_BOUND = math.pi**2 + 1.0


def equilibrium_potential(z):
    """``E_{t ~ Arcsine(-1, 1)} log(1/|z - t|)`` for real or complex ``z``.

    Equal to ``log 2`` on ``[-1, 1]`` and ``log 2 - log|w|`` elsewhere, with
    ``w = z -/+ sqrt(z^2 - 1)`` the root of ``w + 1/w = 2z`` satisfying
    ``|w| >= 1``.
    """
    z = np.asarray(z)
    zc = z.astype(complex)
    w = zc + np.sqrt(zc * zc - 1.0)
    aw = np.abs(w)
    # the two roots are w and 1/w; keep the one outside the unit circle
    aw = np.where(aw < 1.0, 1.0 / aw, aw)
    if np.isrealobj(z):
        # on the real line |w| = |z| + sqrt(z^2 - 1) exactly, without cancellation
        zr = np.abs(z.astype(float))
        aw = np.where(zr > 1.0, zr + np.sqrt(np.maximum(zr * zr - 1.0, 0.0)), 1.0)
    out = math.log(2.0) - np.log(aw)
    return float(out) if out.ndim == 0 else out


equilibrium_potential_closed_form = equilibrium_potential


def _to_unit(cls: ConditionClass, x):
    return (2.0 * np.asarray(x, dtype=float) - (cls.M + cls.m)) / (cls.M - cls.m)


def arcsine_log_potential(cls: ConditionClass, lam):
    """``E_{beta ~ Arcsine(m, M)} log(1/|lam - beta|)``."""
    return equilibrium_potential(_to_unit(cls, lam)) - math.log(cls.radius)


def rate_value(cls: ConditionClass) -> float:
    """``log Racc`` as a potential difference between ``lam = 0`` and the interval."""
    z0 = -(cls.kappa() + 1.0) / (cls.kappa() - 1.0)
    return float(equilibrium_potential(z0)) - math.log(2.0)


def log_rate_at(cls: ConditionClass, lam):
    """Closed form of ``E_{beta ~ Arcsine(m, M)} log|1 - lam/beta|``."""
    out = arcsine_log_potential(cls, 0.0) - arcsine_log_potential(cls, lam)
    return float(out) if np.ndim(out) == 0 else out


def flipped_log_rate_at(cls: ConditionClass, beta):
    """Closed form of ``E_{lam ~ FlippedArcsine(m, M)} log|1 - lam/beta|``."""
    inv = ConditionClass(1.0 / cls.M, 1.0 / cls.m)
    beta = np.asarray(beta, dtype=float)
    out = arcsine_log_potential(inv, 0.0) - arcsine_log_potential(inv, 1.0 / beta)
    return float(out) if np.ndim(out) == 0 else out


def log_factor(beta, lam):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(1.0 - np.asarray(lam) / np.asarray(beta)))


def expected_log_factor(dist, points, side: str = "beta", method: str = "quadrature",
                        nodes: int = 10**6, samples: int = 10**7, rng=None):
    """``E log|1 - lam/beta|`` averaging over ``dist`` at each fixed point.

    ``side="beta"`` averages over ``beta ~ dist`` with ``lam`` fixed at each
    point; ``side="lam"`` averages over ``lam ~ dist`` with ``beta`` fixed.
    Monte Carlo reuses one sample set for all points.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if side not in ("beta", "lam"):
        raise ParameterError(f"side must be 'beta' or 'lam', got {side!r}")

    def integrand(p):
        if side == "beta":
            return lambda b: log_factor(b, p)
        return lambda l: log_factor(p, l)

    if method == "quadrature":
        return np.array([expect_quadrature(dist, integrand(p), nodes) for p in points]), None
    if method == "monte_carlo":
        if rng is None:
            raise ParameterError("Monte Carlo needs an rng")
        gen = _generator(rng)
        means = np.zeros(points.size)
        sq = np.zeros(points.size)
        left = int(samples)
        parts_m, parts_s = [[] for _ in points], [[] for _ in points]
        while left > 0:
            k = min(MC_CHUNK, left)
            x = dist.sample(gen, k)
            for i, p in enumerate(points):
                v = integrand(p)(x)
                parts_m[i].append(deterministic_sum(v))
                parts_s[i].append(deterministic_sum(v * v))
            left -= k
        for i in range(points.size):
            means[i] = math.fsum(parts_m[i]) / samples
            sq[i] = math.fsum(parts_s[i]) / samples
        se = np.sqrt(np.maximum(sq - means**2, 0.0) / samples)
        return means, se
    raise ParameterError(f"unknown method {method!r}")


@dataclass
class EqualizationReport:
    side: str
    points: np.ndarray
    values: np.ndarray
    target: float
    stderr: np.ndarray | None = None

    @property
    def deviations(self) -> np.ndarray:
        return self.values - self.target

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.deviations)))

    @property
    def argmax(self) -> float:
        return float(self.points[int(np.argmax(np.abs(self.deviations)))])

    def to_dict(self) -> dict:
        return {"side": self.side, "target": self.target, "max_abs_deviation": self.max_abs,
                "argmax": self.argmax, "grid": int(self.points.size)}

    def to_csv(self, path) -> Path:
        path = Path(path)
        col = "lambda" if self.side == "beta" else "beta"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([col, "deviation"])
            for p, d in zip(self.points, self.deviations):
                w.writerow([repr(float(p)), repr(float(d))])
        return path


def equalization_residual(cls: ConditionClass, dist=None, grid: int = 101, nodes: int = 10**6,
                          method: str | None = None, samples: int = 10**7, rng=None,
                          points=None) -> EqualizationReport:
    """Deviation of the expected log-factor from ``log Racc`` over a grid.

    For :class:`ArcsineDist` the grid is in ``lam`` and the average is over
    ``beta``; for :class:`FlippedArcsineDist` the grid is in ``beta`` and the
    average is over ``lam`` (Monte Carlo by default). ``points`` overrides
    the grid, e.g. to probe outside ``[m, M]``.
    """
    dist = ArcsineDist(cls) if dist is None else dist
    if points is None:
        if grid < 2:
            raise ParameterError("grid must be >= 2")
        points = np.linspace(cls.m, cls.M, grid)
    flipped = isinstance(dist, FlippedArcsineDist)
    side = "lam" if flipped else "beta"
    method = method or ("monte_carlo" if flipped else "quadrature")
    vals, se = expected_log_factor(dist, points, side, method, nodes, samples, rng)
    return EqualizationReport(side, np.asarray(points, dtype=float), vals, cls.log_racc(), se)


@dataclass
class SupReport:
    value: float
    argmax: float
    margin: float

    def to_dict(self) -> dict:
        return {"sup_value": self.value, "argmax": self.argmax, "margin": self.margin}


def non_arcsine_is_worse(cls: ConditionClass, candidate, nodes: int = 10**5,
                         grid: int = 201) -> SupReport:
    """``sup_lam E_{beta ~ candidate} log|1 - lam/beta|`` and its margin over ``log Racc``.

    ``candidate`` must expose ``quadrature(nodes)``. A node landing exactly on
    a grid point contributes ``-inf`` there, which never affects the sup.
    """
    lam = np.linspace(cls.m, cls.M, grid)
    x, w = candidate.quadrature(nodes)
    vals = np.empty(grid)
    for i, l in enumerate(lam):
        v = log_factor(x, l)
        vals[i] = -np.inf if np.isneginf(v).any() else deterministic_sum(v * w)
    i = int(np.argmax(vals))
    return SupReport(float(vals[i]), float(lam[i]), float(vals[i]) - cls.log_racc())


def inexact_slowdown(cls: ConditionClass, eps: float) -> float:
    """``1/(a - sqrt(a^2 - 1))`` with ``a = 1 + 2 M eps / (M - m)``."""
    if eps < 0:
        raise ParameterError(f"eps must be non-negative, got {eps}")
    a = 1.0 + 2.0 * cls.M * eps / (cls.M - cls.m)
    # the two roots multiply to one, so this is the same number without cancellation
    return a + math.sqrt(a * a - 1.0)


@dataclass
class GamePayoff:
    value: float
    stderr: float | None
    divergent: bool

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "divergent": self.divergent}


def game_payoff(mu, nu, samples: int | None = None, nodes: int | None = None,
                method: str | None = None, rng=None) -> GamePayoff:
    """``E_{beta ~ mu, lam ~ nu} log|1 - lam/beta|``.

    Monte Carlo with independent pairs when ``samples`` is given, else the
    product of both quadrature rules. A zero factor gives ``value=-inf`` and
    ``divergent=True`` instead of an exception.
    """
    method = method or ("monte_carlo" if samples else "quadrature")
    if method == "monte_carlo":
        if rng is None or not samples:
            raise ParameterError("Monte Carlo payoff needs samples and an rng")

        def draw(gen, k):
            return mu.sample(gen, k), nu.sample(gen, k)

        def fn(pair):
            return log_factor(pair[0], pair[1])

        gen = _generator(rng)
        bad = False
        s, s2, left = [], [], int(samples)
        while left > 0:
            k = min(MC_CHUNK, left)
            v = fn(draw(gen, k))
            if np.isneginf(v).any():
                bad = True
                break
            s.append(deterministic_sum(v))
            s2.append(deterministic_sum(v * v))
            left -= k
        if bad:
            return GamePayoff(-math.inf, None, True)
        mean = math.fsum(s) / samples
        var = max(math.fsum(s2) / samples - mean * mean, 0.0)
        return GamePayoff(mean, math.sqrt(var / samples), False)
    if method == "quadrature":
        nodes = nodes or 2000
        b, wb = mu.quadrature(nodes)
        l, wl = nu.quadrature(nodes)
        total = []
        for bi, wi in zip(b, wb):
            v = log_factor(bi, l)
            if np.isneginf(v).any():
                return GamePayoff(-math.inf, None, True)
            total.append(wi * deterministic_sum(v * wl))
        return GamePayoff(math.fsum(total), None, False)
    raise ParameterError(f"unknown method {method!r}")


def factor_variance(cls: ConditionClass, lam, nodes: int = 10**6) -> float:
    """``Var_{beta ~ Arcsine} log|1 - lam/beta|`` by Chebyshev quadrature."""
    d = ArcsineDist(cls)
    mean = expect_quadrature(d, lambda b: log_factor(b, lam), nodes)
    second = expect_quadrature(d, lambda b: log_factor(b, lam) ** 2, nodes)
    return second - mean * mean
