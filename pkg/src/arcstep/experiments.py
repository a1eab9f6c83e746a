"""Seeded experiments built on the engine and potential modules.

Every experiment returns an :class:`ExperimentReport`. Run ``k`` of a batch
draws from ``RngStream(seed, k)``, so a report depends only on its config
and seed. Wall-clock time is kept on the report object but written to a
separate ``timing.json`` so that ``report.json`` stays byte-reproducible.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import (
    ArcsineDist,
    ConditionClass,
    FlippedArcsineDist,
    ParameterError,
    PointMass,
    RngStream,
    UniformDist,
)
from .engine import RunConfig, _factored_batch, factor_statistics, run_batch
from .objectives import (
    InexactGradientModel,
    SeparableObjective,
    check_commuting_hessians,
    log_sum_exp_example,
    logcosh_benchmark,
    radial_benchmark,
)
from .potential import (
    VARIANCE_BOUND,
    equalization_residual,
    equilibrium_potential,
    factor_variance,
    game_payoff,
    inexact_slowdown,
    log_rate_at,
    rate_value,
)
from .schedules import (
    ScheduleSpec,
    ScheduleStream,
    arcsine_bin_masses,
    empirical_measure,
    total_variation_to_arcsine,
)

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentReport",
    "ReportWriteError",
    "emit_report",
    "make_benchmark",
    "rate_convergence",
    "hp_validation",
    "hp_sample_size",
    "instability_demo",
    "inexact_tightness",
    "parallel_best_of_p",
    "lower_bound_game",
    "empirical_measure_convergence",
    "equalize",
    "potential_summary",
    "commute_check",
]

SCHEMA_VERSION = 1
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


class ReportWriteError(OSError):
    pass


@dataclass
class ExperimentReport:
    id: str
    config: dict
    aggregates: dict
    seeds: dict
    tables: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def runs(self) -> list[dict]:
        """Rows of the per-run table, if any."""
        if "runs.csv" not in self.tables:
            return []
        header, rows = self.tables["runs.csv"]
        return [dict(zip(header, r)) for r in rows]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "config": self.config,
            "seeds": self.seeds,
            "aggregates": self.aggregates,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # strict JSON has no inf/nan
        return x if math.isfinite(x) else repr(x)
    return x


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return str(v)


def emit_report(report: ExperimentReport, out_dir, formats=("json", "csv")) -> list[Path]:
    """Write ``report.json`` (always), the CSV tables, and ``timing.json``."""
    out = Path(out_dir)
    paths = []

    def write(path: Path, text: str):
        try:
            path.write_text(text)
        except OSError as e:
            raise ReportWriteError(f"cannot write {path}: {e.strerror or e}") from e
        paths.append(path)

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(f"cannot create output directory {out}: {e.strerror or e}") from e
    write(out / "report.json", report.to_json())
    if "csv" in formats:
        for name, (header, rows) in report.tables.items():
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows([_cell(v) for v in r] for r in rows)
            write(out / name, buf.getvalue())
    write(out / "timing.json", json.dumps({"id": report.id, "wall_clock_seconds": report.wall_clock}) + "\n")
    return paths


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _seeds(seed: int, runs: int, **extra) -> dict:
    return {"seed": int(seed), "stream_ids": [0, int(runs) - 1], **extra}


def _streams(seed: int, runs: int, offset: int = 0) -> list[RngStream]:
    return [RngStream(seed, offset + k) for k in range(runs)]


def make_benchmark(name: str, cls: ConditionClass, d: int = 1, rotation=None,
                   spectrum=None, block_sizes=(3, 2)):
    """``"logcosh"``, ``"quadratic"`` or ``"radial"`` benchmark objective.

    The quadratic default is curvature ``M`` in one dimension and a linear
    spread of ``[m, M]`` otherwise.
    """
    if name == "logcosh":
        return logcosh_benchmark(cls, d, rotation)
    if name == "quadratic":
        if spectrum is None:
            spectrum = [cls.M] if d == 1 else np.linspace(cls.m, cls.M, d)
        return SeparableObjective.quadratic(spectrum, rotation, cls)
    if name == "radial":
        return radial_benchmark(cls, block_sizes, rotation)
    raise ParameterError(f"unknown benchmark {name!r}")


def _quantiles(x) -> dict:
    x = np.asarray(x, dtype=float)
    return {f"q{int(round(q * 100)):02d}": float(np.quantile(x, q)) for q in QUANTILES}


def _rate_rows(batch, offset=0):
    lr = batch.log_rates
    return [
        [k, offset + k, float(lr[k]), float(np.exp(lr[k])), bool(batch.diverged[k]),
         int(batch.blowup_iter[k]), int(batch.n_done[k])]
        for k in range(batch.runs)
    ]


RUN_HEADER = ["run", "stream_id", "log_rate", "rate", "diverged", "blowup_iter", "n_done"]


def rate_convergence(cls: ConditionClass, objective: str = "logcosh", n: int = 10**4,
                     runs: int = 100, seed: int = 0, d: int = 8, rotation=None,
                     spectrum=None, block_sizes=(3, 2), x0=None, jobs: int = 1,
                     method: str = "factored") -> ExperimentReport:
    """Per-run ``log R_n`` under i.i.d. Arcsine stepsizes and its spread around ``log Racc``."""
    with _Clock() as clock:
        obj = make_benchmark(objective, cls, d, rotation, spectrum, block_sizes)
        x0 = obj.minimizer + 1.0 if x0 is None else np.asarray(x0, dtype=float)
        cfg = RunConfig(obj, ScheduleSpec.iid_arcsine(cls), x0, n, record="final", method=method)
        batch = run_batch(cfg, _streams(seed, runs), jobs=jobs)
        lr = batch.log_rates
        target = cls.log_racc()
        ok = ~batch.diverged
        med = float(np.median(lr))
        agg = {
            "log_racc": target,
            "racc": cls.racc(),
            "median_log_rate": med,
            "median_rate": math.exp(med),
            "deviation": abs(med - target),
            "median_abs_deviation": float(np.median(np.abs(lr - target))),
            "mean_log_rate": float(np.mean(lr[ok])) if ok.any() else math.nan,
            "std_log_rate": float(np.std(lr[ok], ddof=1)) if ok.sum() > 1 else math.nan,
            "quantiles": _quantiles(lr),
            "best_log_rate": float(np.min(lr)),
            "worst_log_rate": float(np.max(lr)),
            "divergent_runs": int(batch.diverged.sum()),
            "all_divergent": bool(batch.diverged.all()),
            "tolerance_3sigma": 3.0 * math.sqrt(VARIANCE_BOUND / n),
            "variance_bound": VARIANCE_BOUND,
            "variance_endpoints": {
                "at_m": factor_variance(cls, cls.m, 10**5),
                "at_M": factor_variance(cls, cls.M, 10**5),
            },
        }
        config = {"cls": cls.to_dict(), "objective": obj.to_dict(), "n": n, "runs": runs,
                  "x0": list(map(float, x0)), "schedule": "iid_arcsine", "method": method}
    return ExperimentReport("rate", config, agg, _seeds(seed, runs),
                            {"runs.csv": (RUN_HEADER, _rate_rows(batch))}, clock.seconds)


def hp_sample_size(d: int, eps: float, delta: float, variance: float = VARIANCE_BOUND) -> int:
    """Iterations for failure probability ``delta`` at log-deviation ``eps``."""
    return math.ceil(variance * d / (delta * eps * eps))


def hp_validation(cls: ConditionClass, d: int = 1, eps: float = 0.3, delta: float = 0.1,
                  runs: int = 10**4, seed: int = 0, spectrum=None, jobs: int = 1) -> ExperimentReport:
    """Failure frequency of ``R_n >= e^eps Racc`` at the prescribed ``n``."""
    if not (0 < eps and 0 < delta < 1):
        raise ParameterError(f"need eps > 0 and 0 < delta < 1, got eps={eps}, delta={delta}")
    with _Clock() as clock:
        n = hp_sample_size(d, eps, delta)
        obj = make_benchmark("quadratic", cls, d, spectrum=spectrum)
        cfg = RunConfig(obj, ScheduleSpec.iid_arcsine(cls), obj.minimizer + 1.0, n,
                        record="final", method="factored")
        batch = run_batch(cfg, _streams(seed, runs), jobs=jobs)
        fail = (batch.log_rates >= cls.log_racc() + eps) | batch.diverged
        freq = float(fail.mean())
        se = math.sqrt(delta * (1 - delta) / runs)
        spec_lams = np.diag(obj.hessian(obj.minimizer))
        v_emp = max(factor_variance(cls, float(l), 10**5) for l in spec_lams)
        agg = {
            "n_star": n,
            "failures": int(fail.sum()),
            "failure_frequency": freq,
            "binomial_stderr": se,
            "threshold": delta + 3 * se,
            "within_bound": freq <= delta + 3 * se,
            "variance_constant": VARIANCE_BOUND,
            "variance_quadrature": v_emp,
            "n_star_quadrature_variance": hp_sample_size(d, eps, delta, v_emp),
            "median_log_rate": float(np.median(batch.log_rates)),
            "log_racc": cls.log_racc(),
        }
        config = {"cls": cls.to_dict(), "d": d, "eps": eps, "delta": delta, "runs": runs,
                  "spectrum": spec_lams.tolist()}
    return ExperimentReport("hp", config, agg, _seeds(seed, runs),
                            {"runs.csv": (RUN_HEADER, _rate_rows(batch))}, clock.seconds)


def instability_demo(cls: ConditionClass, n: int = 3, runs: int = 10**5,
                     seed: int = 0) -> ExperimentReport:
    """Monte Carlo of ``x_n/x_0`` on ``f = (M/2) x^2`` from ``x_0 = 1``.

    The mean of the ratio is ``(1 - sqrt(kappa))^n``, and the ``1/n``-th
    root of its mean absolute value is at least ``sqrt(kappa) - 1``.
    """
    with _Clock() as clock:
        spec = ScheduleSpec.iid_arcsine(cls)
        betas = np.stack([ScheduleStream(spec, r).take_inverse(n) for r in _streams(seed, runs)])
        ratio = np.prod(1.0 - cls.M / betas, axis=1)
        mean = float(ratio.mean())
        se = float(ratio.std(ddof=1) / math.sqrt(runs))
        exact = (1.0 - math.sqrt(cls.kappa())) ** n
        am = float(np.abs(ratio).mean())
        am_se = float(np.abs(ratio).std(ddof=1) / math.sqrt(runs))
        root = am ** (1.0 / n)
        # delta method for the standard error of the root
        root_se = am_se * am ** (1.0 / n - 1.0) / n
        agg = {
            "mean_ratio": mean,
            "mean_ratio_stderr": se,
            "mean_ratio_exact": exact,
            "z_score": (mean - exact) / se if se > 0 else math.nan,
            "mean_abs_ratio_root": root,
            "mean_abs_ratio_root_stderr": root_se,
            "sqrt_kappa_minus_1": math.sqrt(cls.kappa()) - 1.0,
            "mean_of_root": float(np.mean(np.abs(ratio) ** (1.0 / n))),
            "racc": cls.racc(),
            "heavy_tail_warning": bool(se > 0.1 * abs(mean)),
        }
        config = {"cls": cls.to_dict(), "n": n, "runs": runs, "objective": "(M/2) x^2", "x0": 1.0}
    rows = [[k, k, float(r)] for k, r in enumerate(ratio)]
    return ExperimentReport("instability", config, agg, _seeds(seed, runs),
                            {"runs.csv": (["run", "stream_id", "ratio"], rows)}, clock.seconds)


def inexact_tightness(cls: ConditionClass, eps: float = 0.01, n: int = 10**4, runs: int = 20,
                      seed: int = 0, mode: str = "overestimate", jobs: int = 1) -> ExperimentReport:
    """Rates under relative gradient errors against the worst-case slowdown.

    Over- and random errors use ``f = (M/2) x^2``; underestimates use
    ``f = (m/2) x^2``, the end of the interval they push outward.
    """
    with _Clock() as clock:
        lam = cls.m if mode == "underestimate" else cls.M
        obj = SeparableObjective.quadratic([lam], None, cls)
        model = None if eps == 0 else InexactGradientModel(eps, mode)
        cfg = RunConfig(obj, ScheduleSpec.iid_arcsine(cls), obj.minimizer + 1.0, n,
                        record="final", inexact=model, method="factored")
        batch = run_batch(cfg, _streams(seed, runs), jobs=jobs)
        lr = batch.log_rates
        slow = inexact_slowdown(cls, eps)
        bound = math.log(slow) + cls.log_racc()
        eff = lam * (1 - eps) if mode == "underestimate" else lam * (1 + eps)
        mean = float(lr.mean())
        agg = {
            "mean_log_rate": mean,
            "mean_log_rate_stderr": float(lr.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.nan,
            "slowdown": slow,
            "adversarial_log_rate": bound,
            "deviation_from_adversarial": abs(mean - bound),
            "predicted_log_rate": float(log_rate_at(cls, eff)) if mode != "random" else None,
            "tolerance_3sigma": 3.0 * math.sqrt(VARIANCE_BOUND / n),
            "log_racc": cls.log_racc(),
            "divergent_runs": int(batch.diverged.sum()),
        }
        config = {"cls": cls.to_dict(), "eps": eps, "n": n, "runs": runs, "mode": mode,
                  "curvature": lam}
    return ExperimentReport("inexact", config, agg, _seeds(seed, runs),
                            {"runs.csv": (RUN_HEADER, _rate_rows(batch))}, clock.seconds)


def parallel_best_of_p(cls: ConditionClass, p: int = 64, k: int = 1000, n: int = 1000,
                       runs: int = 20, seed: int = 0, lam: float | None = None) -> ExperimentReport:
    """Best-of-``p`` with restarts every ``k`` steps on ``f = (lam/2) x^2``.

    Repetition ``r`` runs machine ``j`` on ``RngStream(seed, r).child(j)``;
    the single-machine baseline uses ``child(p)``. Each round all machines
    restart from the iterate closest to the minimizer.
    """
    if p < 1:
        raise ParameterError("p must be >= 1")
    if k < 1 or n % k:
        raise ParameterError(f"sync interval k={k} must divide n={n}")
    with _Clock() as clock:
        lam = cls.M if lam is None else float(lam)
        obj = SeparableObjective.quadratic([lam], None, cls)
        spec = ScheduleSpec.iid_arcsine(cls)
        cfg = RunConfig(obj, spec, obj.minimizer + 1.0, k, record="final", method="factored")
        u0 = obj.to_diag(cfg.x0)
        log_d0 = float(np.log(np.abs(u0[0])))
        realized = np.empty(runs)
        single = np.empty(runs)
        z_single = []
        for r in range(runs):
            base = RngStream(seed, r)
            streams = [ScheduleStream(spec, base.child(j)) for j in range(p)]
            state = (np.sign(u0), np.log(np.abs(u0)))
            for _ in range(n // k):
                betas = np.stack([s.take_inverse(k) for s in streams])
                b = _factored_batch(cfg, betas, None, start=state)
                best = int(np.argmin(np.where(b.diverged, np.inf, b.log_dist_final)))
                state = (b.sign[best], b.log_coord[best])
            realized[r] = (state[1][0] - log_d0) / n
            sb = ScheduleStream(spec, base.child(p)).take_inverse(n)
            z = np.log(np.abs(1.0 - lam / sb))
            z_single.append(z)
            single[r] = z.mean()
        stats = factor_statistics(np.stack(z_single))
        sigma = float(math.sqrt(np.mean(stats.var)))
        sigma_q = math.sqrt(factor_variance(cls, lam, 10**5))
        pred = sigma * math.sqrt(2.0 * math.log(p) / k) if p > 1 else 0.0
        med_single = float(np.median(single))
        med_real = float(np.median(realized))
        improvement = med_single - med_real
        agg = {
            "median_realized_log_rate": med_real,
            "median_single_log_rate": med_single,
            "best_realized_log_rate": float(realized.min()),
            "realized_improvement": improvement,
            "sigma_empirical": sigma,
            "sigma_quadrature": sigma_q,
            "predicted_improvement": pred,
            "predicted_log_rate": cls.log_racc() - pred,
            "improvement_ratio": improvement / pred if pred > 0 else None,
            "within_factor_2": bool(0.5 * pred <= improvement <= 2.0 * pred) if pred > 0 else None,
            "fraction_improved": float(np.mean(realized <= single)),
            "log_racc": cls.log_racc(),
        }
        config = {"cls": cls.to_dict(), "p": p, "k": k, "n": n, "runs": runs, "curvature": lam}
    rows = [[r, r, float(realized[r]), float(single[r])] for r in range(runs)]
    return ExperimentReport("parallel", config, agg, _seeds(seed, runs, machine_child_keys=[0, p]),
                            {"runs.csv": (["run", "stream_id", "best_of_p_log_rate",
                                           "single_log_rate"], rows)}, clock.seconds)


def default_game_candidates(cls: ConditionClass) -> dict:
    return {
        "arcsine": ArcsineDist(cls),
        "point_mass_center": PointMass(cls.center),
        "uniform": UniformDist(cls.m, cls.M),
    }


def lower_bound_game(cls: ConditionClass, candidates: dict | None = None,
                     samples: int = 10**7, seed: int = 0, nodes: int = 2000,
                     tolerance: float = 1e-3) -> ExperimentReport:
    """Payoff of each stepsize law against the flipped-Arcsine adversary.

    Candidate ``i`` (in insertion order) draws from ``RngStream(seed, i)``.
    """
    with _Clock() as clock:
        cands = default_game_candidates(cls) if candidates is None else candidates
        adversary = FlippedArcsineDist(cls)
        target = cls.log_racc()
        rows, per = [], {}
        for i, (name, mu) in enumerate(cands.items()):
            mc = game_payoff(mu, adversary, samples=samples, rng=RngStream(seed, i))
            qd = game_payoff(mu, adversary, nodes=nodes)
            ok = (not mc.divergent) and mc.value >= target - tolerance
            per[name] = {"monte_carlo": mc.to_dict(), "quadrature": qd.to_dict(),
                         "margin": mc.value - target, "at_least_value": ok}
            rows.append([name, i, mc.value, mc.stderr, qd.value, mc.value - target, ok])
        agg = {"log_racc": target, "tolerance": tolerance, "candidates": per,
               "all_at_least_value": all(v["at_least_value"] for v in per.values())}
        config = {"cls": cls.to_dict(), "samples": samples, "nodes": nodes,
                  "candidates": {k: repr(v) for k, v in cands.items()}}
    header = ["candidate", "stream_id", "mc_value", "mc_stderr", "quadrature_value", "margin",
              "at_least_value"]
    return ExperimentReport("game", config, agg, _seeds(seed, len(cands)),
                            {"runs.csv": (header, rows)}, clock.seconds)


def empirical_measure_convergence(cls: ConditionClass, n_values=(10**2, 10**3, 10**4),
                                  bins: int = 50) -> ExperimentReport:
    """TV distance from binned Chebyshev(n) nodes to the binned Arcsine law."""
    n_values = [int(v) for v in n_values]
    if n_values != sorted(n_values):
        raise ParameterError("n values must be ascending")
    with _Clock() as clock:
        tv, rows = [], []
        for n in n_values:
            h = empirical_measure(ScheduleSpec.chebyshev(cls, n), n, bins)
            q = arcsine_bin_masses(cls, h.edges)
            tv.append(total_variation_to_arcsine(h, cls))
            for j in range(len(h.counts)):
                rows.append([n, float(h.edges[j]), float(h.edges[j + 1]), float(h.mass[j]), float(q[j])])
        agg = {"n_values": n_values, "tv": tv,
               "decreasing": bool(all(b < a for a, b in zip(tv, tv[1:])))}
        config = {"cls": cls.to_dict(), "bins": bins, "schedule": "chebyshev"}
    header = ["n", "bin_left", "bin_right", "empirical_mass", "arcsine_mass"]
    return ExperimentReport("schedule-measure", config, agg, {"seed": None},
                            {"measure.csv": (header, rows)}, clock.seconds)


def equalize(cls: ConditionClass, side: str = "arcsine", grid: int = 101, nodes: int = 10**6,
             samples: int = 10**7, seed: int = 0, method: str | None = None) -> ExperimentReport:
    """Equalization residual over a grid, with the per-point curve as CSV."""
    with _Clock() as clock:
        dist = ArcsineDist(cls) if side == "arcsine" else FlippedArcsineDist(cls)
        rep = equalization_residual(cls, dist, grid, nodes, method, samples, RngStream(seed, 0))
        agg = {**rep.to_dict(), "log_racc": cls.log_racc()}
        config = {"cls": cls.to_dict(), "distribution": side, "grid": grid, "nodes": nodes,
                  "samples": samples, "method": method or ("monte_carlo" if side != "arcsine"
                                                           else "quadrature")}
        col = "lambda" if rep.side == "beta" else "beta"
        rows = [[float(p), float(d)] for p, d in zip(rep.points, rep.deviations)]
    return ExperimentReport("equalize", config, agg, {"seed": int(seed)},
                            {"residuals.csv": ([col, "deviation"], rows)}, clock.seconds)


def potential_summary(cls: ConditionClass, z_values=(0.0, 0.5, 1.0, 3.0),
                      eps: float = 0.0) -> ExperimentReport:
    """Closed-form potential values, ``log Racc`` two ways, and the slowdown factor."""
    with _Clock() as clock:
        z0 = -(cls.kappa() + 1.0) / (cls.kappa() - 1.0)
        agg = {
            "log_racc": cls.log_racc(),
            "rate_value": rate_value(cls),
            "potential_difference_at_z0": float(equilibrium_potential(z0)) - math.log(2.0),
            "z0": z0,
            "potentials": {repr(float(z)): float(equilibrium_potential(float(z))) for z in z_values},
            "inexact_slowdown": inexact_slowdown(cls, eps),
        }
        config = {"cls": cls.to_dict(), "z_values": list(map(float, z_values)), "eps": eps}
    return ExperimentReport("potential", config, agg, {"seed": None}, {}, clock.seconds)


def commute_check(cls: ConditionClass, benchmark: str = "logcosh", d: int = 4, rotation=1,
                  probes: int = 6, seed: int = 0) -> ExperimentReport:
    """Finite-difference Hessian commutators at random probes.

    ``benchmark="lse"`` uses the two-dimensional log-sum-exp counterexample
    and ignores ``cls``, ``d`` and ``rotation``.
    """
    with _Clock() as clock:
        gen = RngStream(seed, 0).generator
        if benchmark == "lse":
            f, _ = log_sum_exp_example()
            pts = 2.0 * gen.standard_normal((probes, 2))
            M = None
        else:
            obj = make_benchmark(benchmark, cls, d, rotation)
            f = obj.value
            pts = obj.minimizer + 2.0 * gen.standard_normal((probes, obj.dim))
            M = cls.M
        rep = check_commuting_hessians(f, pts, M=M)
        agg = rep.to_dict()
        config = {"benchmark": benchmark, "cls": cls.to_dict(), "d": d, "rotation": rotation,
                  "probes": probes}
    return ExperimentReport("commute-check", config, agg, {"seed": int(seed)}, {}, clock.seconds)
