"""Stepsize schedules: constant, Chebyshev of length n, and i.i.d. Arcsine."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import (
    ArcsineDist,
    ConditionClass,
    ParameterError,
    RngStream,
    arcsine_cdf,
    chebyshev_angles,
)

__all__ = [
    "ScheduleExhausted",
    "ScheduleSpec",
    "ScheduleStream",
    "Histogram",
    "chebyshev_inverse_stepsizes",
    "next_stepsize",
    "empirical_measure",
    "arcsine_bin_masses",
    "total_variation_to_arcsine",
]

KINDS = ("constant", "chebyshev", "arcsine")


class ScheduleExhausted(IndexError):
    pass


def chebyshev_inverse_stepsizes(cls: ConditionClass, n: int, order="natural") -> np.ndarray:
    """Inverse stepsizes ``c + r cos((2t+1)pi/(2n))`` in the requested order.

    ``order`` is ``"natural"``, ``"reversed"`` or an explicit permutation of
    ``range(n)``; entry ``t`` of the result is node ``order[t]``.
    """
    beta = cls.center + cls.radius * np.cos(chebyshev_angles(n))
    return beta[_permutation(order, n)]


def _permutation(order, n: int) -> np.ndarray:
    if isinstance(order, str):
        if order == "natural":
            return np.arange(n)
        if order == "reversed":
            return np.arange(n)[::-1]
        raise ParameterError(f"unknown Chebyshev order {order!r}")
    perm = np.asarray(order, dtype=int)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ParameterError(f"order must be a permutation of range({n})")
    return perm


@dataclass(frozen=True)
class ScheduleSpec:
    """What stepsizes to use. Build with the classmethods, not directly."""

    kind: str
    cls: ConditionClass
    alpha: float | None = None
    n: int | None = None
    order: str | tuple = "natural"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if self.alpha is None or not self.alpha > 0:
                raise ParameterError(f"constant stepsize must be positive, got {self.alpha}")
        if self.kind == "chebyshev":
            if self.n is None or int(self.n) < 1:
                raise ParameterError(f"Chebyshev length must be >= 1, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
            if not isinstance(self.order, str):
                object.__setattr__(self, "order", tuple(int(i) for i in self.order))
            _permutation(self.order, self.n)

    @classmethod
    def constant(cls, condition: ConditionClass, alpha: float) -> "ScheduleSpec":
        return cls("constant", condition, alpha=float(alpha))

    @classmethod
    def chebyshev(cls, condition: ConditionClass, n: int, order="natural") -> "ScheduleSpec":
        return cls("chebyshev", condition, n=n, order=order)

    @classmethod
    def iid_arcsine(cls, condition: ConditionClass) -> "ScheduleSpec":
        return cls("arcsine", condition)

    @property
    def is_finite(self) -> bool:
        return self.kind == "chebyshev"

    @property
    def convergent(self) -> bool | None:
        """For constant schedules, whether ``alpha < 2/M``; ``None`` otherwise."""
        if self.kind != "constant":
            return None
        return self.alpha < 2.0 / self.cls.M

    def inverse_stepsizes(self, n: int | None = None) -> np.ndarray:
        """Deterministic inverse stepsizes (constant or Chebyshev)."""
        if self.kind == "chebyshev":
            return chebyshev_inverse_stepsizes(self.cls, self.n, self.order)
        if self.kind == "constant":
            if n is None:
                raise ParameterError("constant schedule needs an explicit length")
            return np.full(n, 1.0 / self.alpha)
        raise ParameterError("i.i.d. Arcsine schedule has no fixed stepsizes; use a stream")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.cls.m, "M": self.cls.M}
        if self.kind == "constant":
            d["alpha"] = self.alpha
        elif self.kind == "chebyshev":
            d["n"] = self.n
            d["order"] = self.order if isinstance(self.order, str) else list(self.order)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleSpec":
        condition = ConditionClass(d["m"], d["M"])
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(condition, d["alpha"])
        if kind == "chebyshev":
            return cls.chebyshev(condition, d["n"], d.get("order", "natural"))
        if kind == "arcsine":
            return cls.iid_arcsine(condition)
        raise ParameterError(f"unknown schedule kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "ScheduleSpec":
        return cls.from_dict(json.loads(text))


class ScheduleStream:
    """Stateful source of stepsizes ``alpha_t = 1/beta_t``.

    Only the i.i.d. Arcsine kind consumes randomness; draw ``t`` uses the
    ``t``-th uniform of ``rng`` whether taken one at a time or in blocks.
    """

    def __init__(self, spec: ScheduleSpec, rng: RngStream | None = None):
        if spec.kind == "arcsine" and rng is None:
            raise ParameterError("i.i.d. Arcsine schedule requires an RngStream")
        self.spec = spec
        self.rng = rng
        self.cursor = 0
        self._fixed = spec.inverse_stepsizes() if spec.is_finite else None
        self._arcsine = ArcsineDist(spec.cls) if spec.kind == "arcsine" else None

    def __len__(self):
        if self._fixed is None:
            raise TypeError("unbounded schedule has no length")
        return len(self._fixed)

    def remaining(self) -> int | None:
        if self._fixed is None:
            return None
        return len(self._fixed) - self.cursor

    def take_inverse(self, k: int) -> np.ndarray:
        """Next ``k`` inverse stepsizes."""
        if k < 0:
            raise ValueError("k must be non-negative")
        kind = self.spec.kind
        if kind == "constant":
            out = np.full(k, 1.0 / self.spec.alpha)
        elif kind == "chebyshev":
            if self.cursor + k > len(self._fixed):
                raise ScheduleExhausted(
                    f"Chebyshev schedule of length {len(self._fixed)} exhausted "
                    f"(requested step {self.cursor + k - 1})"
                )
            out = self._fixed[self.cursor : self.cursor + k].copy()
        else:
            out = self._arcsine.sample(self.rng, k)
        self.cursor += k
        return out

    def take(self, k: int) -> np.ndarray:
        return 1.0 / self.take_inverse(k)

    def next_stepsize(self) -> float:
        return float(self.take(1)[0])


def next_stepsize(s: ScheduleStream) -> float:
    return s.next_stepsize()


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    outside: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.outside

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.total


def empirical_measure(spec: ScheduleSpec, n: int, bins=50, rng: RngStream | None = None) -> Histogram:
    """Histogram of the first ``n`` inverse stepsizes over ``[m, M]``.

    ``bins`` is a bin count (equal widths on ``[m, M]``) or explicit edges.
    Values outside the edges are counted in ``outside``.
    """
    if n < 1:
        raise ParameterError("empty schedule: n must be >= 1")
    if spec.is_finite and n != spec.n:
        raise ParameterError(f"Chebyshev schedule has length {spec.n}, asked for {n}")
    beta = ScheduleStream(spec, None if rng is None else rng.fresh()).take_inverse(n)
    if np.ndim(bins) == 0:
        edges = np.linspace(spec.cls.m, spec.cls.M, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(beta, bins=edges)
    return Histogram(edges, counts, n - int(counts.sum()))


def arcsine_bin_masses(cls: ConditionClass, edges: Sequence[float]) -> np.ndarray:
    return np.diff(arcsine_cdf(ArcsineDist(cls), np.asarray(edges, dtype=float)))


def total_variation_to_arcsine(hist: Histogram, cls: ConditionClass) -> float:
    """TV distance between binned empirical mass and binned Arcsine mass."""
    q = arcsine_bin_masses(cls, hist.edges)
    p = hist.mass
    return 0.5 * (float(np.abs(p - q).sum()) + hist.outside / hist.total)
