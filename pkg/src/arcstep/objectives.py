"""Strongly convex, smooth test objectives with exact gradients.

Objectives live in an ambient basis ``x``. Their structure is exposed in a
diagonal basis through the offset ``u = U x - c``, where ``U`` is the stored
rotation and ``c`` collects the component minimizers, so that ``x* = U^T c``.
The GD engine works with per-coordinate curvature ratios in that basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distributions import ConditionClass, ParameterError, RngStream, _generator

__all__ = [
    "QuadraticComponent",
    "LogCoshComponent",
    "PiecewiseQuadraticComponent",
    "QuadraticProfile",
    "LogCoshProfile",
    "Objective",
    "SeparableObjective",
    "RadialObjective",
    "InexactGradientModel",
    "CommuteReport",
    "random_rotation",
    "gradient",
    "curvature_ratio",
    "inexact_gradient",
    "fd_hessian",
    "check_commuting_hessians",
    "log_sum_exp_example",
    "logcosh_benchmark",
    "radial_benchmark",
    "objective_from_dict",
]

_TINY = 1e-8


def _logcosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _tanh_over(u):
    """``tanh(u)/u`` with the limit 1 at the origin."""
    u = np.asarray(u, dtype=float)
    safe = np.where(np.abs(u) < _TINY, 1.0, u)
    return np.where(np.abs(u) < _TINY, 1.0, np.tanh(safe) / safe)


# --- univariate components (functions of the offset u = y - minimizer) ------


@dataclass(frozen=True)
class QuadraticComponent:
    curvature: float
    minimizer: float = 0.0
    kind = "quadratic"

    @property
    def bounds(self):
        return self.curvature, self.curvature

    def value(self, u):
        return 0.5 * self.curvature * np.square(u)

    def derivative(self, u):
        return self.curvature * np.asarray(u, dtype=float)

    def second_derivative(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.curvature)

    def ratio(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.curvature)

    def to_dict(self):
        return {"kind": "quadratic", "curvature": self.curvature, "minimizer": self.minimizer}


@dataclass(frozen=True)
class LogCoshComponent:
    """``m u^2/2 + (M-m) log cosh(u)``; second derivative spans ``(m, M]``."""

    m: float
    M: float
    minimizer: float = 0.0
    kind = "logcosh"

    @property
    def bounds(self):
        return self.m, self.M

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * self.m * u * u + (self.M - self.m) * _logcosh(u)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        return self.m * u + (self.M - self.m) * np.tanh(u)

    def second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        return self.m + (self.M - self.m) / np.cosh(np.clip(u, -700, 700)) ** 2

    def ratio(self, u):
        return self.m + (self.M - self.m) * _tanh_over(u)

    def to_dict(self):
        return {"kind": "logcosh", "m": self.m, "M": self.M, "minimizer": self.minimizer}


class PiecewiseQuadraticComponent:
    """C^1 function whose second derivative is piecewise constant.

    ``breakpoints`` are offsets from the minimizer, sorted; ``curvatures``
    has one more entry than ``breakpoints`` (leftmost piece first).
    """

    kind = "piecewise"

    def __init__(self, breakpoints: Sequence[float], curvatures: Sequence[float], minimizer=0.0):
        bp = np.asarray(breakpoints, dtype=float)
        cv = np.asarray(curvatures, dtype=float)
        if cv.shape != (bp.size + 1,):
            raise ParameterError("need len(curvatures) == len(breakpoints) + 1")
        if np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if np.any(cv <= 0):
            raise ParameterError("curvatures must be positive")
        self.breakpoints = bp
        self.curvatures = cv
        self.minimizer = float(minimizer)
        # knots include the minimizer (offset 0) so derivative/value anchor there
        j = int(np.searchsorted(bp, 0.0))
        if j < bp.size and bp[j] == 0.0:
            knots, curv = bp, cv
        else:
            knots = np.insert(bp, j, 0.0)
            curv = np.insert(cv, j, cv[j])
        self._knots = knots
        self._curv = curv  # curv[k] is the curvature left of knots[k]; curv[-1] right of the last
        z = int(np.flatnonzero(knots == 0.0)[0])
        d = np.zeros(knots.size)
        v = np.zeros(knots.size)
        for k in range(z + 1, knots.size):
            h = knots[k] - knots[k - 1]
            d[k] = d[k - 1] + curv[k] * h
            v[k] = v[k - 1] + d[k - 1] * h + 0.5 * curv[k] * h * h
        for k in range(z - 1, -1, -1):
            h = knots[k] - knots[k + 1]
            d[k] = d[k + 1] + curv[k + 1] * h
            v[k] = v[k + 1] + d[k + 1] * h + 0.5 * curv[k + 1] * h * h
        self._d, self._v = d, v

    def __repr__(self):
        return (f"PiecewiseQuadraticComponent({self.breakpoints.tolist()}, "
                f"{self.curvatures.tolist()}, minimizer={self.minimizer})")

    @property
    def bounds(self):
        return float(self.curvatures.min()), float(self.curvatures.max())

    def _locate(self, u):
        u = np.asarray(u, dtype=float)
        # anchor each point at the closest knot between it and the minimizer, so
        # small offsets are never computed as differences of large numbers
        left = np.searchsorted(self._knots, u, side="right") - 1
        right = np.searchsorted(self._knots, u, side="left")
        neg = u < 0
        k = np.where(neg, right, left)
        c = np.where(neg, self._curv[np.minimum(right, self._curv.size - 1)],
                     self._curv[np.minimum(left + 1, self._curv.size - 1)])
        return u, k, c

    def derivative(self, u):
        u, k, c = self._locate(u)
        return self._d[k] + c * (u - self._knots[k])

    def value(self, u):
        u, k, c = self._locate(u)
        h = u - self._knots[k]
        return self._v[k] + self._d[k] * h + 0.5 * c * h * h

    def second_derivative(self, u):
        return self._locate(u)[2]

    def ratio(self, u):
        u = np.asarray(u, dtype=float)
        at_zero = self._curv[int(np.searchsorted(self._knots, 0.0, side="right"))]
        safe = np.where(u == 0.0, 1.0, u)
        return np.where(u == 0.0, at_zero, self.derivative(safe) / safe)

    def to_dict(self):
        return {"kind": "piecewise", "breakpoints": self.breakpoints.tolist(),
                "curvatures": self.curvatures.tolist(), "minimizer": self.minimizer}


# --- radial profiles h(r), r = ||u_block|| ---------------------------------


@dataclass(frozen=True)
class QuadraticProfile:
    curvature: float
    kind = "quadratic"

    @property
    def bounds(self):
        return self.curvature, self.curvature

    def value(self, r):
        return 0.5 * self.curvature * np.square(r)

    def ratio(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.curvature)

    def to_dict(self):
        return {"kind": "quadratic", "curvature": self.curvature}


@dataclass(frozen=True)
class LogCoshProfile:
    """``h(r) = m r^2/2 + (M-m) log cosh(r)``; Hessian eigenvalues lie in ``(m, M]``."""

    m: float
    M: float
    kind = "logcosh"

    @property
    def bounds(self):
        return self.m, self.M

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * self.m * r * r + (self.M - self.m) * _logcosh(r)

    def ratio(self, r):
        """``h'(r)/r``: the curvature ratio shared by every coordinate of the block."""
        return self.m + (self.M - self.m) * _tanh_over(r)

    def to_dict(self):
        return {"kind": "logcosh", "m": self.m, "M": self.M}


_COMPONENTS = {
    "quadratic": lambda d: QuadraticComponent(d["curvature"], d.get("minimizer", 0.0)),
    "logcosh": lambda d: LogCoshComponent(d["m"], d["M"], d.get("minimizer", 0.0)),
    "piecewise": lambda d: PiecewiseQuadraticComponent(
        d["breakpoints"], d["curvatures"], d.get("minimizer", 0.0)),
}
_PROFILES = {
    "quadratic": lambda d: QuadraticProfile(d["curvature"]),
    "logcosh": lambda d: LogCoshProfile(d["m"], d["M"]),
}


def random_rotation(d: int, seed: int) -> np.ndarray:
    """Haar-random orthogonal matrix via QR of a seeded Gaussian matrix."""
    g = RngStream(seed, 0).generator.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def _bounds_class(bounds, cls):
    lo = min(b[0] for b in bounds)
    hi = max(b[1] for b in bounds)
    if cls is None:
        return ConditionClass(lo, hi)
    if lo < cls.m * (1 - 1e-12) or hi > cls.M * (1 + 1e-12):
        raise ParameterError(
            f"component curvatures [{lo}, {hi}] fall outside [m, M] = [{cls.m}, {cls.M}]")
    return cls


class Objective:
    """Base for structured objectives. Subclasses fill ``dim``, ``rotation``,
    ``offset`` (the vector ``c``), ``cls`` and the diagonal-basis hooks."""

    structure = "general"
    dim: int
    cls: ConditionClass
    rotation: np.ndarray | None
    offset: np.ndarray
    rotation_seed: int | None = None

    @property
    def minimizer(self) -> np.ndarray:
        if self.rotation is None:
            return self.offset.copy()
        return self.rotation.T @ self.offset

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ParameterError(f"expected dimension {self.dim}, got {x.shape[-1]}")
        return x

    def to_diag(self, x) -> np.ndarray:
        """Offset ``u = U x - c`` (works on stacked points)."""
        x = self._check(x)
        y = x if self.rotation is None else x @ self.rotation.T
        return y - self.offset

    def from_diag(self, u) -> np.ndarray:
        y = np.asarray(u, dtype=float) + self.offset
        return y if self.rotation is None else y @ self.rotation

    def _rotate_back(self, g):
        return g if self.rotation is None else g @ self.rotation

    def value(self, x) -> float:
        return self.diag_value(self.to_diag(x))

    def gradient(self, x) -> np.ndarray:
        return self._rotate_back(self.diag_grad(self.to_diag(x)))

    def curvature_ratio(self, x) -> np.ndarray:
        """Per-coordinate ``lam = f_i'(u_i)/u_i`` in the diagonal basis.

        Coordinates already at the minimizer are excluded and marked NaN.
        """
        u = self.to_diag(x)
        lam = self.diag_ratio(u)
        return np.where(u == 0.0, np.nan, lam)

    # diagonal-basis hooks; u has shape (..., dim)
    def diag_value(self, u):
        raise NotImplementedError

    def diag_ratio(self, u):
        raise NotImplementedError

    def diag_grad(self, u):
        return self.diag_ratio(u) * u

    def _rotation_dict(self):
        if self.rotation is None:
            return None
        if self.rotation_seed is not None:
            return {"seed": self.rotation_seed}
        return {"matrix": self.rotation.tolist()}


def _resolve_rotation(rotation, dim):
    if rotation is None:
        return None, None
    if isinstance(rotation, (int, np.integer)):
        return random_rotation(dim, int(rotation)), int(rotation)
    U = np.asarray(rotation, dtype=float)
    if U.shape != (dim, dim) or not np.allclose(U @ U.T, np.eye(dim), atol=1e-10):
        raise ParameterError("rotation must be a dim x dim orthogonal matrix")
    return U, None


class SeparableObjective(Objective):
    """``f(x) = sum_i f_i([U x]_i)``. A rotation may be a matrix or an integer seed."""

    def __init__(self, components, rotation=None, cls: ConditionClass | None = None):
        self.components = list(components)
        if not self.components:
            raise ParameterError("need at least one component")
        self.dim = len(self.components)
        self.rotation, self.rotation_seed = _resolve_rotation(rotation, self.dim)
        self.offset = np.array([c.minimizer for c in self.components], dtype=float)
        self.cls = _bounds_class([c.bounds for c in self.components], cls)
        kinds = {c.kind for c in self.components}
        self.structure = "quadratic" if kinds == {"quadratic"} else "separable"
        self._uniform = len(kinds) == 1 and kinds <= {"quadratic", "logcosh"}

    def __repr__(self):
        return f"SeparableObjective(dim={self.dim}, structure={self.structure!r}, cls={self.cls})"

    @classmethod
    def quadratic(cls, spectrum, rotation=None, condition=None, minimizer=None):
        spectrum = np.atleast_1d(np.asarray(spectrum, dtype=float))
        mins = np.zeros_like(spectrum) if minimizer is None else np.asarray(minimizer, float)
        comps = [QuadraticComponent(float(l), float(c)) for l, c in zip(spectrum, mins)]
        return cls(comps, rotation, condition)

    def diag_value(self, u):
        u = np.asarray(u, dtype=float)
        return sum(c.value(u[..., i]) for i, c in enumerate(self.components))

    def diag_ratio(self, u):
        u = np.asarray(u, dtype=float)
        if self._uniform and self.structure == "quadratic":
            return np.broadcast_to(
                np.array([c.curvature for c in self.components]), u.shape).copy()
        out = np.empty_like(u)
        for i, c in enumerate(self.components):
            out[..., i] = c.ratio(u[..., i])
        return out

    def diag_grad(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for i, c in enumerate(self.components):
            out[..., i] = c.derivative(u[..., i])
        return out

    def diag_second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.stack([c.second_derivative(u[..., i]) for i, c in enumerate(self.components)], -1)

    def hessian(self, x) -> np.ndarray:
        h = self.diag_second_derivative(self.to_diag(x))
        if self.rotation is None:
            return np.diag(h)
        return self.rotation.T @ np.diag(h) @ self.rotation

    def to_dict(self):
        d = {
            "kind": self.structure,
            "dimension": self.dim,
            "m": self.cls.m,
            "M": self.cls.M,
            "rotation": self._rotation_dict(),
        }
        if self.structure == "quadratic":
            d["spectrum"] = [c.curvature for c in self.components]
            d["minimizer"] = self.offset.tolist()
        else:
            d["components"] = [c.to_dict() for c in self.components]
        return d


class RadialObjective(Objective):
    """``f(x) = sum_b h_b(||[U x - c]_{S_b}||)`` over consecutive coordinate blocks."""

    structure = "radial"

    def __init__(self, blocks, rotation=None, cls: ConditionClass | None = None, center=None):
        self.blocks = [(p, int(s)) for p, s in blocks]
        if not self.blocks or any(s < 1 for _, s in self.blocks):
            raise ParameterError("blocks need positive sizes")
        self.dim = sum(s for _, s in self.blocks)
        self.rotation, self.rotation_seed = _resolve_rotation(rotation, self.dim)
        self.offset = np.zeros(self.dim) if center is None else np.asarray(center, float)
        self.cls = _bounds_class([p.bounds for p, _ in self.blocks], cls)
        self._slices = []
        start = 0
        for _, s in self.blocks:
            self._slices.append(slice(start, start + s))
            start += s

    def __repr__(self):
        return f"RadialObjective(dim={self.dim}, blocks={[s for _, s in self.blocks]}, cls={self.cls})"

    def diag_value(self, u):
        u = np.asarray(u, dtype=float)
        return sum(p.value(np.linalg.norm(u[..., sl], axis=-1))
                   for (p, _), sl in zip(self.blocks, self._slices))

    def diag_ratio(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for (p, _), sl in zip(self.blocks, self._slices):
            r = np.linalg.norm(u[..., sl], axis=-1)
            out[..., sl] = np.asarray(p.ratio(r))[..., None]
        return out

    def to_dict(self):
        return {
            "kind": "radial",
            "dimension": self.dim,
            "m": self.cls.m,
            "M": self.cls.M,
            "rotation": self._rotation_dict(),
            "blocks": [{"profile": p.to_dict(), "size": s} for p, s in self.blocks],
            "center": self.offset.tolist(),
        }


def objective_from_dict(d: dict) -> Objective:
    cls = ConditionClass(d["m"], d["M"]) if "m" in d else None
    rot = d.get("rotation")
    if rot is not None:
        rot = rot["seed"] if "seed" in rot else rot["matrix"]
    kind = d["kind"]
    if kind == "quadratic":
        return SeparableObjective.quadratic(d["spectrum"], rot, cls, d.get("minimizer"))
    if kind == "separable":
        comps = [_COMPONENTS[c["kind"]](c) for c in d["components"]]
        return SeparableObjective(comps, rot, cls)
    if kind == "radial":
        blocks = [(_PROFILES[b["profile"]["kind"]](b["profile"]), b["size"]) for b in d["blocks"]]
        return RadialObjective(blocks, rot, cls, d.get("center"))
    raise ParameterError(f"unknown objective kind {kind!r}")


def logcosh_benchmark(cls: ConditionClass, d: int, rotation=None) -> SeparableObjective:
    """``d`` identical LogCosh coordinates spanning the whole class."""
    return SeparableObjective([LogCoshComponent(cls.m, cls.M) for _ in range(d)], rotation, cls)


def radial_benchmark(cls: ConditionClass, block_sizes=(3, 2), rotation=None) -> RadialObjective:
    return RadialObjective([(LogCoshProfile(cls.m, cls.M), s) for s in block_sizes], rotation, cls)


def gradient(obj: Objective, x) -> np.ndarray:
    return obj.gradient(x)


def curvature_ratio(obj: Objective, x) -> np.ndarray:
    return obj.curvature_ratio(x)


# --- inexact gradients -------------------------------------------------------

INEXACT_MODES = ("overestimate", "underestimate", "random")


@dataclass(frozen=True)
class InexactGradientModel:
    """Relative gradient error ``||g~ - grad f|| <= epsilon ||grad f||``.

    ``overestimate``/``underestimate`` return ``(1 +/- epsilon) grad f``;
    ``random`` adds a perturbation uniform in the ball of radius
    ``epsilon ||grad f||``.
    """

    epsilon: float
    mode: str = "overestimate"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ParameterError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.mode not in INEXACT_MODES:
            raise ParameterError(f"unknown inexact mode {self.mode!r}")

    def perturb(self, g, rng=None) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.mode == "overestimate":
            return (1.0 + self.epsilon) * g
        if self.mode == "underestimate":
            return (1.0 - self.epsilon) * g
        if rng is None:
            raise ParameterError("random inexact mode needs an rng")
        gen = _generator(rng)
        d = g.shape[-1]
        if d == 1:
            # the unit ball is [-1, 1]; one uniform draw per step
            w = np.array([2.0 * gen.random() - 1.0])
        else:
            w = gen.standard_normal(d)
            w *= gen.random() ** (1.0 / d) / np.linalg.norm(w)
        return g + self.epsilon * np.linalg.norm(g) * w

    def to_dict(self):
        return {"epsilon": self.epsilon, "mode": self.mode}


def inexact_gradient(model: InexactGradientModel, obj: Objective, x, rng=None) -> np.ndarray:
    return model.perturb(obj.gradient(x), rng)


# --- separability probe ------------------------------------------------------


def fd_hessian(f: Callable, x, step: float | None = None) -> np.ndarray:
    """Central finite-difference Hessian from function values."""
    x = np.asarray(x, dtype=float)
    d = x.size
    h = 1e-4 * (1.0 + np.linalg.norm(x)) if step is None else float(step)
    E = h * np.eye(d)
    f0 = f(x)
    H = np.empty((d, d))
    for i in range(d):
        H[i, i] = (f(x + E[i]) - 2.0 * f0 + f(x - E[i])) / (h * h)
        for j in range(i + 1, d):
            H[i, j] = H[j, i] = (
                f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                - f(x - E[i] + E[j]) + f(x - E[i] - E[j])
            ) / (4.0 * h * h)
    if not np.all(np.isfinite(H)):
        raise ArithmeticError(f"non-finite finite-difference Hessian at x={x.tolist()}")
    return H


@dataclass
class CommuteReport:
    max_commutator: float
    tolerance: float
    worst_pair: tuple
    hessians: list = field(repr=False, default_factory=list)

    @property
    def consistent_with_separable(self) -> bool:
        return self.max_commutator <= self.tolerance

    @property
    def verdict(self) -> str:
        return "consistent with separable" if self.consistent_with_separable else "not separable"

    def to_dict(self):
        return {"max_commutator": self.max_commutator, "tolerance": self.tolerance,
                "worst_pair": list(self.worst_pair), "verdict": self.verdict}


def check_commuting_hessians(f: Callable, probes, step: float | None = None,
                             tolerance: float | None = None, M: float | None = None) -> CommuteReport:
    """Largest spectral norm of ``H_i H_j - H_j H_i`` over probe pairs.

    Default tolerance is ``1e-3 M^2``; without ``M`` the largest Hessian norm
    seen at the probes is used.
    """
    probes = [np.asarray(p, dtype=float) for p in probes]
    if len(probes) < 2:
        raise ParameterError("need at least two probe points")
    hs = [fd_hessian(f, p, step) for p in probes]
    if M is None:
        M = max(np.linalg.norm(h, 2) for h in hs)
    tol = 1e-3 * M * M if tolerance is None else float(tolerance)
    worst, pair = 0.0, (0, 1)
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            c = np.linalg.norm(hs[i] @ hs[j] - hs[j] @ hs[i], 2)
            if c > worst:
                worst, pair = float(c), (i, j)
    return CommuteReport(worst, tol, pair, hs)


def log_sum_exp_example(reg=(0.1, 1.0)):
    """Non-separable ``log(e^x + e^y) + (a x^2 + b y^2)/2``.

    Returns ``(f, hessian)`` with the analytic Hessian.
    """
    a, b = reg

    def f(v):
        v = np.asarray(v, dtype=float)
        return float(np.logaddexp(v[0], v[1]) + 0.5 * (a * v[0] ** 2 + b * v[1] ** 2))

    def hessian(v):
        p = 1.0 / (1.0 + math.exp(v[1] - v[0]))
        s = p * (1.0 - p)
        return np.array([[a + s, -s], [-s, b + s]])

    return f, hessian
