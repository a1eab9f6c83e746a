"""Gradient descent driver, rate extraction and worst-case quadratic rates.

Two execution paths produce the same iterates in exact arithmetic:

``gradient``
    Plain ``x <- x - alpha * g`` in the ambient basis. Distances come from
    the iterates themselves, so long accelerated runs underflow eventually.
``factored``
    Works in the objective's diagonal basis and keeps every coordinate as a
    sign and a log-magnitude, multiplying by ``1 - lam/beta`` each step.
    Nothing underflows, so horizons of 10^4+ steps are fine. Vectorized
    over independent runs.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .distributions import ConditionClass, ParameterError, RngStream
from .objectives import InexactGradientModel, Objective
from .schedules import ScheduleSpec, ScheduleStream

__all__ = [
    "RunConfig",
    "Trajectory",
    "BatchResult",
    "FactorStats",
    "run_gd",
    "run_batch",
    "worst_case_quadratic_rate",
    "chebyshev_rate_closed_form",
    "factor_statistics",
]

# log of the largest finite double; a distance beyond it is an overflow
LOG_OVERFLOW = math.log(np.finfo(float).max)
RECORD_MODES = ("full", "rates", "final")
METHODS = ("gradient", "factored")


@dataclass
class RunConfig:
    objective: Objective
    schedule: ScheduleSpec
    x0: np.ndarray
    n: int
    record: str = "full"
    inexact: InexactGradientModel | None = None
    method: str = "gradient"

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if self.x0.size != self.objective.dim:
            raise ParameterError(
                f"x0 has dimension {self.x0.size}, objective has {self.objective.dim}")
        if np.array_equal(self.x0, self.objective.minimizer):
            raise ParameterError("x0 must differ from the minimizer")
        if self.n < 1:
            raise ParameterError("iteration budget n must be >= 1")
        if self.schedule.is_finite and self.schedule.n < self.n:
            raise ParameterError(
                f"schedule has {self.schedule.n} steps, run needs {self.n}")
        if self.record not in RECORD_MODES:
            raise ParameterError(f"record must be one of {RECORD_MODES}")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}")
        if (self.method == "factored" and self.inexact is not None
                and self.inexact.mode == "random" and self.objective.dim > 1):
            raise ParameterError("random gradient errors mix coordinates; use method='gradient'")


@dataclass
class Trajectory:
    """One GD run. ``log_dist[t] = log ||x_t - x*||``; ``z[t, i] = log|1 - lam[t, i]/beta_t|``."""

    log_dist: np.ndarray
    betas: np.ndarray
    log_coord0: np.ndarray
    log_coord: np.ndarray
    diverged: bool = False
    blowup_iter: int | None = None
    lam: np.ndarray | None = None
    z: np.ndarray | None = None
    x_final: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.log_dist) - 1

    @property
    def dist(self) -> np.ndarray:
        return np.exp(self.log_dist)

    @property
    def rates(self) -> np.ndarray:
        """``R_t = (||x_t - x*|| / ||x_0 - x*||)^(1/t)`` for ``t = 1..n``."""
        t = np.arange(1, len(self.log_dist))
        with np.errstate(invalid="ignore"):
            return np.exp((self.log_dist[1:] - self.log_dist[0]) / t)

    @property
    def log_rate(self) -> float:
        return float((self.log_dist[-1] - self.log_dist[0]) / self.n)

    @property
    def final_rate(self) -> float:
        return math.exp(self.log_rate)

    @property
    def coord_log_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return (self.log_coord - self.log_coord0) / self.n

    def to_csv(self, path) -> Path:
        path = Path(path)
        d = 0 if self.z is None else self.z.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "dist", "log_dist", "R_t"] + [f"z_{i}" for i in range(d)])
            rates = np.concatenate([[np.nan], self.rates])
            for t in range(len(self.log_dist)):
                zs = [] if t == 0 or d == 0 else [repr(float(v)) for v in self.z[t - 1]]
                zs = zs or [""] * d
                w.writerow([t, repr(float(np.exp(self.log_dist[t]))),
                            repr(float(self.log_dist[t])), repr(float(rates[t]))] + zs)
        return path


@dataclass
class BatchResult:
    """Stacked outputs of many runs from a common start (run index first)."""

    log_dist0: float
    log_dist_final: np.ndarray
    n_done: np.ndarray
    diverged: np.ndarray
    blowup_iter: np.ndarray
    log_coord0: np.ndarray
    log_coord: np.ndarray
    sign: np.ndarray | None = None
    log_dist: np.ndarray | None = None
    z: np.ndarray | None = None
    lam: np.ndarray | None = None
    betas: np.ndarray | None = None

    @property
    def runs(self) -> int:
        return len(self.log_dist_final)

    @property
    def log_rates(self) -> np.ndarray:
        """Per-run ``log R_n`` over the iterations actually completed."""
        return (self.log_dist_final - self.log_dist0) / self.n_done

    @property
    def rates(self) -> np.ndarray:
        return np.exp(self.log_rates)

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(
            log_dist=self.log_dist[k] if self.log_dist is not None
            else np.array([self.log_dist0, self.log_dist_final[k]]),
            betas=None if self.betas is None else self.betas[k],
            log_coord0=self.log_coord0,
            log_coord=self.log_coord[k],
            diverged=bool(self.diverged[k]),
            blowup_iter=None if self.blowup_iter[k] < 0 else int(self.blowup_iter[k]),
            lam=None if self.lam is None else self.lam[k],
            z=None if self.z is None else self.z[k],
        )

    @staticmethod
    def concat(parts: Sequence["BatchResult"]) -> "BatchResult":
        def cat(name):
            vals = [getattr(p, name) for p in parts]
            return None if vals[0] is None else np.concatenate(vals)

        p0 = parts[0]
        return BatchResult(
            log_dist0=p0.log_dist0, log_dist_final=cat("log_dist_final"), n_done=cat("n_done"),
            diverged=cat("diverged"), blowup_iter=cat("blowup_iter"), log_coord0=p0.log_coord0,
            log_coord=cat("log_coord"), sign=cat("sign"), log_dist=cat("log_dist"), z=cat("z"), lam=cat("lam"),
            betas=cat("betas"),
        )


def _log_abs(u):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(u))


def _gradient_run(cfg: RunConfig, rng: RngStream | None) -> Trajectory:
    obj, n = cfg.objective, cfg.n
    betas = ScheduleStream(cfg.schedule, None if rng is None else rng.fresh()).take_inverse(n)
    noise = None if rng is None else rng.child(1)
    full = cfg.record == "full"
    xstar = obj.minimizer
    x = cfg.x0.copy()
    u0 = obj.to_diag(x)
    log_dist = np.full(n + 1, np.nan)
    log_dist[0] = math.log(np.linalg.norm(x - xstar))
    lam = np.full((n, obj.dim), np.nan) if full else None
    z = np.full((n, obj.dim), np.nan) if full else None
    diverged, blowup = False, None
    for t in range(n):
        alpha = 1.0 / betas[t]
        with np.errstate(over="ignore", invalid="ignore"):
            g = obj.gradient(x)
            if cfg.inexact is not None:
                g = cfg.inexact.perturb(g, noise)
        if full:
            u = obj.to_diag(x)
            if cfg.inexact is None:
                lt = obj.curvature_ratio(x)
            elif cfg.inexact.mode != "random":
                # scaled exact ratios; recovering them as g/u loses digits near zero
                s = 1.0 + cfg.inexact.epsilon if cfg.inexact.mode == "overestimate" \
                    else 1.0 - cfg.inexact.epsilon
                lt = s * obj.curvature_ratio(x)
            else:
                gd = g if obj.rotation is None else obj.rotation @ g
                with np.errstate(divide="ignore", invalid="ignore"):
                    lt = np.where(u == 0.0, np.nan, gd / np.where(u == 0.0, 1.0, u))
            lam[t] = lt
            with np.errstate(divide="ignore"):
                z[t] = np.log(np.abs(1.0 - alpha * lt))
        with np.errstate(over="ignore", invalid="ignore"):
            x = x - alpha * g
        if not np.all(np.isfinite(x)):
            diverged, blowup = True, t + 1
            break
        dist = np.linalg.norm(x - xstar)
        log_dist[t + 1] = math.log(dist) if dist > 0 else -np.inf
    done = n if blowup is None else blowup - 1
    return Trajectory(
        log_dist=log_dist[: done + 1],
        betas=betas,
        log_coord0=_log_abs(u0),
        log_coord=_log_abs(obj.to_diag(x)) if not diverged else np.full(obj.dim, np.inf),
        diverged=diverged,
        blowup_iter=blowup,
        lam=None if lam is None else lam[:done],
        z=None if z is None else z[:done],
        x_final=x,
    )


def _factored_batch(cfg: RunConfig, betas: np.ndarray, noise_gens, start=None) -> BatchResult:
    """``start=(sign, log|u|)`` in the diagonal basis overrides ``cfg.x0``."""
    obj, n = cfg.objective, betas.shape[1]
    R, d = betas.shape[0], obj.dim
    if start is None:
        u0 = obj.to_diag(cfg.x0)
        sign0, logabs0 = np.sign(u0), _log_abs(u0)
    else:
        sign0, logabs0 = (np.asarray(a, dtype=float) for a in start)
    sign = np.broadcast_to(sign0, (R, d)).copy()
    logabs = np.broadcast_to(logabs0, (R, d)).copy()
    log_d0 = float(0.5 * logsumexp(2.0 * logabs0))
    full = cfg.record == "full"
    path = cfg.record in ("full", "rates")
    log_dist = np.full((R, n + 1), np.nan) if path else None
    if path:
        log_dist[:, 0] = log_d0
    z_rec = np.full((R, n, d), np.nan) if full else None
    lam_rec = np.full((R, n, d), np.nan) if full else None
    alive = np.ones(R, dtype=bool)
    blowup = np.full(R, -1, dtype=int)
    n_done = np.full(R, n, dtype=int)
    last = np.full(R, log_d0)
    model = cfg.inexact
    for t in range(n):
        with np.errstate(over="ignore", under="ignore"):
            u = sign * np.exp(logabs)
        lam = obj.diag_ratio(u)
        if model is not None:
            if model.mode == "overestimate":
                lam = lam * (1.0 + model.epsilon)
            elif model.mode == "underestimate":
                lam = lam * (1.0 - model.epsilon)
            else:
                # g + eps |g| w = g (1 + eps w sign(u)) in one dimension
                e = np.array([2.0 * g.random() - 1.0 for g in noise_gens])
                lam = lam * (1.0 + model.epsilon * e[:, None] * sign)
        f = 1.0 - lam / betas[:, t, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            zt = np.log(np.abs(f))
        excluded = np.isneginf(logabs)
        zt = np.where(excluded, np.nan, zt)
        if full:
            z_rec[:, t] = np.where(alive[:, None], zt, np.nan)
            lam_rec[:, t] = np.where(alive[:, None] & ~excluded, lam, np.nan)
        step = alive[:, None] & ~excluded
        logabs = np.where(step, logabs + np.nan_to_num(zt, nan=0.0, neginf=-np.inf), logabs)
        sign = np.where(step, sign * np.sign(f), sign)
        ld = 0.5 * logsumexp(2.0 * logabs, axis=1)
        blew = alive & (ld > LOG_OVERFLOW)
        if blew.any():
            blowup[blew] = t + 1
            n_done[blew] = t
            alive &= ~blew
        last = np.where(alive, ld, last)
        if path:
            log_dist[:, t + 1] = np.where(alive, ld, np.nan)
        if not alive.any():
            break
    return BatchResult(
        log_dist0=log_d0,
        log_dist_final=last,
        n_done=n_done,
        diverged=blowup >= 0,
        blowup_iter=blowup,
        log_coord0=logabs0,
        log_coord=logabs,
        sign=sign,
        log_dist=log_dist,
        z=z_rec,
        lam=lam_rec,
        betas=betas if full else None,
    )


def _draw_betas(cfg: RunConfig, rngs) -> np.ndarray:
    return np.stack([
        ScheduleStream(cfg.schedule, None if r is None else r.fresh()).take_inverse(cfg.n)
        for r in rngs
    ])


def run_gd(cfg: RunConfig, rng: RngStream | None = None) -> Trajectory:
    """Run ``cfg.n`` GD steps. Overflow ends the run with ``diverged=True``."""
    if cfg.method == "gradient":
        return _gradient_run(cfg, rng)
    if cfg.record == "final":
        # a single path is cheap; keep it so the trajectory knows its length
        cfg = replace(cfg, record="rates")
    return run_batch(cfg, [rng]).trajectory(0)


def run_batch(cfg: RunConfig, rngs: Sequence[RngStream | None], jobs: int = 1) -> BatchResult:
    """Many independent runs from ``cfg.x0``, one stream per run.

    Work is split into contiguous chunks of runs (``jobs`` threads); chunk
    results are concatenated in run order, so the output does not depend on
    ``jobs``.
    """
    rngs = list(rngs)
    if not rngs:
        raise ParameterError("need at least one run")
    if cfg.method == "gradient":
        trajs = [_gradient_run(cfg, r) for r in rngs]
        return _stack_trajectories(cfg, trajs)

    def work(chunk):
        betas = _draw_betas(cfg, chunk)
        noise = None
        if cfg.inexact is not None and cfg.inexact.mode == "random":
            noise = [r.child(1).generator for r in chunk]
        return _factored_batch(cfg, betas, noise)

    jobs = max(1, int(jobs))
    if jobs == 1 or len(rngs) == 1:
        return work(rngs)
    bounds = np.linspace(0, len(rngs), min(jobs, len(rngs)) + 1).astype(int)
    chunks = [rngs[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(work, chunks))
    return BatchResult.concat(parts)


def _stack_trajectories(cfg, trajs) -> BatchResult:
    n = cfg.n
    R, d = len(trajs), cfg.objective.dim
    log_dist = np.full((R, n + 1), np.nan)
    for k, tr in enumerate(trajs):
        log_dist[k, : len(tr.log_dist)] = tr.log_dist
    full = cfg.record == "full"

    def pad(name):
        out = np.full((R, n, d), np.nan)
        for k, tr in enumerate(trajs):
            a = getattr(tr, name)
            out[k, : len(a)] = a
        return out

    return BatchResult(
        log_dist0=float(trajs[0].log_dist[0]),
        log_dist_final=np.array([tr.log_dist[-1] for tr in trajs]),
        n_done=np.array([tr.n for tr in trajs]),
        diverged=np.array([tr.diverged for tr in trajs]),
        blowup_iter=np.array([-1 if tr.blowup_iter is None else tr.blowup_iter for tr in trajs]),
        log_coord0=trajs[0].log_coord0,
        log_coord=np.stack([tr.log_coord for tr in trajs]),
        log_dist=log_dist if cfg.record != "final" else None,
        z=pad("z") if full else None,
        lam=pad("lam") if full else None,
        betas=np.stack([tr.betas for tr in trajs]) if full else None,
    )


def chebyshev_rate_closed_form(cls: ConditionClass, n: int) -> float:
    """``(2 rho^n / (1 + rho^(2n)))^(1/n)`` with ``rho`` the accelerated rate."""
    lr = cls.log_racc()
    return math.exp((math.log(2.0) + n * lr - math.log1p(math.exp(2 * n * lr))) / n)


def worst_case_quadratic_rate(schedule, cls: ConditionClass, grid: int = 4096,
                              return_argmax: bool = False):
    """``max_{lam in [m, M]} prod_t |1 - alpha_t lam|^(1/n)`` for stepsizes ``alpha_t``.

    Evaluates the mean log-factor on a uniform grid (endpoints included),
    then refines every interior local maximum with a bounded scalar search.
    """
    a = np.asarray(schedule, dtype=float).ravel()
    if a.size == 0:
        raise ParameterError("empty schedule")
    if grid < 2:
        raise ParameterError("grid must be >= 2")
    n = a.size

    def mean_log(lam):
        lam = np.atleast_1d(lam)
        out = np.empty(lam.size)
        step = max(1, 2**22 // n)
        with np.errstate(divide="ignore"):
            for i in range(0, lam.size, step):
                blk = lam[i : i + step]
                out[i : i + step] = np.log(np.abs(1.0 - np.outer(blk, a))).sum(axis=1) / n
        return out

    lam = np.linspace(cls.m, cls.M, grid)
    vals = mean_log(lam)
    best_i = int(np.argmax(vals))
    best_v, best_l = float(vals[best_i]), float(lam[best_i])
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    for i in interior:
        res = minimize_scalar(lambda l: -mean_log(l)[0], bounds=(lam[i - 1], lam[i + 1]),
                              method="bounded", options={"xatol": 1e-13 * cls.M})
        v = -float(res.fun)
        if v > best_v:
            best_v, best_l = v, float(res.x)
    rate = math.exp(best_v)
    return (rate, best_l) if return_argmax else rate


@dataclass
class FactorStats:
    mean: np.ndarray
    var: np.ndarray
    mean_stderr: np.ndarray
    cov: np.ndarray
    cov_stderr: np.ndarray
    runs: int


def factor_statistics(source, coord: int = 0) -> FactorStats:
    """Across-run moments of the factors ``Z_t`` for one coordinate.

    ``source`` is a list of trajectories, a :class:`BatchResult`, or an
    array of shape ``(runs, n)``. The covariance standard error at
    ``(s, t)`` is the sample std of the centered products over runs divided
    by ``sqrt(runs)``.
    """
    if isinstance(source, BatchResult):
        if source.z is None:
            raise ParameterError("batch was not recorded with full factors")
        Z = source.z[:, :, coord]
    elif isinstance(source, np.ndarray):
        Z = source
    else:
        if any(t.z is None for t in source):
            raise ParameterError("trajectories were not recorded with full factors")
        lengths = {t.z.shape[0] for t in source}
        if len(lengths) != 1:
            raise ParameterError(f"mismatched trajectory lengths {sorted(lengths)}")
        Z = np.stack([t.z[:, coord] for t in source])
    Z = np.asarray(Z, dtype=float)
    R = Z.shape[0]
    if R < 2:
        raise ParameterError("need at least two runs")
    mean = Z.mean(axis=0)
    C = Z - mean
    var = (C**2).sum(axis=0) / (R - 1)
    cov = C.T @ C / (R - 1)
    # second moments of the centered products, for the covariance standard error
    sq = (C**2).T @ (C**2) / R
    cov_se = np.sqrt(np.maximum(sq - (C.T @ C / R) ** 2, 0.0) / R)
    return FactorStats(mean, var, np.sqrt(var / R), cov, cov_se, R)
