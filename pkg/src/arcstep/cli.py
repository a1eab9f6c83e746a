"""Command-line front end: ``arcstep <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input (bad flags, ``m >= M``, unusable
output directory), 1 failure while computing or writing results.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import experiments as ex
from .distributions import ConditionClass, ParameterError

SEED_ENV = "ARCSTEP_SEED"

SUBCOMMANDS = {
    "rate": "rate of GD with i.i.d. Arcsine stepsizes vs the accelerated rate (separable, "
            "rotated or radially separable benchmarks)",
    "hp": "high-probability bound: failure frequency of R_n >= e^eps Racc at the prescribed n",
    "instability": "mean of x_n/x_0 on (M/2)x^2 vs (1 - sqrt(kappa))^n; mean-based rates blow up",
    "inexact": "rate under relative gradient errors vs the closed-form slowdown factor",
    "parallel": "best-of-p runs with periodic restarts vs the Gaussian back-of-envelope speedup",
    "game": "stepsize-vs-curvature game: payoff of candidate stepsize laws against the "
            "flipped-Arcsine adversary",
    "equalize": "equalization: E log|1 - lam/beta| is constant in lam under the Arcsine law",
    "schedule-measure": "TV distance from Chebyshev(n) inverse stepsizes to the Arcsine law",
    "commute-check": "separability probe: finite-difference Hessian commutators",
    "potential": "closed-form logarithmic potential, log Racc and the inexact slowdown",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("condition class (default m=1, M=4)")
    g.add_argument("--m", type=float, help="strong convexity")
    g.add_argument("--M", type=float, help="smoothness")
    g.add_argument("--kappa", type=float, help="condition number; uses m=1/kappa, M=1")
    p.add_argument("--seed", type=int, help=f"base seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--out", type=Path, help="output directory; without it the report goes to stdout")
    p.add_argument("--format", default="json,csv", help="comma list from {json,csv}")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="max concurrent worker threads (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arcstep", description="Experiments on gradient descent with "
                     "i.i.d. Arcsine-distributed inverse stepsizes.",
                     epilog="subcommands:\n" + "\n".join(
                         f"  {k:<17} {v}" for k, v in SUBCOMMANDS.items()),
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def add(name):
        p = sub.add_parser(name, help=SUBCOMMANDS[name], description=SUBCOMMANDS[name])
        _common(p)
        return p

    p = add("rate")
    p.add_argument("--objective", choices=["logcosh", "quadratic", "radial"], default="quadratic")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--rotation", type=int, help="seed of a random rotation of the benchmark")

    p = add("hp")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--runs", type=int, default=10**4)

    p = add("instability")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--runs", type=int, default=10**5)

    p = add("inexact")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--n", type=int, default=10**4)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--mode", choices=["overestimate", "underestimate", "random"],
                   default="overestimate")

    p = add("parallel")
    p.add_argument("--p", type=int, default=64)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--lam", type=float, help="curvature of the quadratic (default M)")

    p = add("game")
    p.add_argument("--samples", type=int, default=10**7)
    p.add_argument("--nodes", type=int, default=2000)

    p = add("equalize")
    p.add_argument("--dist", choices=["arcsine", "flipped"], default="arcsine")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--nodes", type=int, default=10**6)
    p.add_argument("--samples", type=int, default=10**7)
    p.add_argument("--method", choices=["quadrature", "monte_carlo"])

    p = add("schedule-measure")
    p.add_argument("--n-values", type=int, nargs="+", default=[100, 1000, 10000])
    p.add_argument("--bins", type=int, default=50)

    p = add("commute-check")
    p.add_argument("--benchmark", choices=["logcosh", "quadratic", "radial", "lse"],
                   default="logcosh")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--rotation", type=int, default=1)
    p.add_argument("--probes", type=int, default=6)

    p = add("potential")
    p.add_argument("--z", type=float, nargs="+", default=[0.0, 0.5, 1.0, 3.0])
    p.add_argument("--eps", type=float, default=0.0)
    return parser


def _condition(args) -> ConditionClass:
    if args.kappa is not None:
        if args.m is not None or args.M is not None:
            raise UsageError("give either --kappa or --m/--M, not both")
        return ConditionClass.from_kappa(args.kappa)
    m = 1.0 if args.m is None else args.m
    M = 4.0 if args.M is None else args.M
    return ConditionClass(m, M)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None


def _check_out_dir(out: Path):
    """Create ``out`` and probe that a file can be written there."""
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out, prefix=".probe"):
            pass
    except OSError as e:
        raise UsageError(f"output directory {out} is not writable: {e.strerror or e}") from None


def _dispatch(args, cls: ConditionClass, seed: int) -> ex.ExperimentReport:
    c = args.command
    if c == "rate":
        return ex.rate_convergence(cls, args.objective, args.n, args.runs, seed, args.d,
                                   args.rotation, jobs=args.jobs)
    if c == "hp":
        return ex.hp_validation(cls, args.d, args.eps, args.delta, args.runs, seed, jobs=args.jobs)
    if c == "instability":
        return ex.instability_demo(cls, args.n, args.runs, seed)
    if c == "inexact":
        return ex.inexact_tightness(cls, args.eps, args.n, args.runs, seed, args.mode, args.jobs)
    if c == "parallel":
        return ex.parallel_best_of_p(cls, args.p, args.k, args.n, args.runs, seed, args.lam)
    if c == "game":
        return ex.lower_bound_game(cls, None, args.samples, seed, args.nodes)
    if c == "equalize":
        return ex.equalize(cls, args.dist, args.grid, args.nodes, args.samples, seed, args.method)
    if c == "schedule-measure":
        return ex.empirical_measure_convergence(cls, args.n_values, args.bins)
    if c == "commute-check":
        return ex.commute_check(cls, args.benchmark, args.d, args.rotation, args.probes, seed)
    if c == "potential":
        return ex.potential_summary(cls, args.z, args.eps)
    raise UsageError(f"unknown subcommand {c!r}")


def _summary(report: ex.ExperimentReport) -> str:
    lines = [f"[{report.id}]"]
    for k, v in sorted(report.aggregates.items()):
        if not isinstance(v, (dict, list)):
            lines.append(f"  {k}: {v}")
    return "\n".join(lines)


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:  # --help
            return int(e.code or 0)
        cls = _condition(args)
        seed = _seed(args)
        formats = {f.strip() for f in args.format.split(",") if f.strip()}
        if not formats <= {"json", "csv"}:
            raise UsageError(f"unknown format(s): {sorted(formats - {'json', 'csv'})}")
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if args.out is not None:
            _check_out_dir(args.out)
    except (UsageError, ParameterError) as e:
        print(f"error: {e}", file=stderr)
        return 2
    try:
        report = _dispatch(args, cls, seed)
    except ParameterError as e:
        print(f"error: {e}", file=stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - any compute failure is a runtime error
        print(f"error: {type(e).__name__}: {e}", file=stderr)
        return 1
    if args.out is None:
        stdout.write(report.to_json())
        return 0
    try:
        paths = ex.emit_report(report, args.out, formats)
    except OSError as e:
        print(f"error: {e}", file=stderr)
        return 1
    print(_summary(report), file=stdout)
    for p in paths:
        print(f"wrote {p}", file=stdout)
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
