import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from arcstep.distributions import (
    ArcsineDist,
    ConditionClass,
    FlippedArcsineDist,
    ParameterError,
    PointMass,
    RngStream,
    UniformDist,
)
from arcstep.potential import (
    VARIANCE_BOUND,
    equalization_residual,
    equilibrium_potential,
    factor_variance,
    flipped_log_rate_at,
    game_payoff,
    inexact_slowdown,
    log_rate_at,
    non_arcsine_is_worse,
    rate_value,
)

C4 = ConditionClass(1, 4)
C100 = ConditionClass.from_kappa(100)


def theta_quad(fn):
    """E fn(t) for t ~ Arcsine(-1, 1), via t = cos(theta) with theta uniform on (0, pi)."""
    val, _ = integrate.quad(lambda th: fn(math.cos(th)), 0, math.pi, limit=400)
    return val / math.pi


def oracle_log_rate(cls, lam):
    c, r = cls.center, cls.radius
    return theta_quad(lambda t: math.log(abs(1 - lam / (c + r * t))))


class Discrete:
    """Finite mixture of point masses; stands in for arbitrary candidate laws."""

    def __init__(self, points, weights):
        self.points = np.asarray(points, float)
        self.weights = np.asarray(weights, float) / np.sum(weights)

    def quadrature(self, nodes=None):
        return self.points, self.weights

    def sample(self, rng, size):
        return rng.choice(self.points, size=size, p=self.weights)


def test_potential_inside_and_boundary():
    assert equilibrium_potential(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert equilibrium_potential(1.0) == pytest.approx(math.log(2), abs=1e-15)
    assert equilibrium_potential(-1.0) == pytest.approx(math.log(2), abs=1e-15)
    assert equilibrium_potential(1 + 1e-12) == pytest.approx(math.log(2), abs=1e-5)


def test_potential_at_three_against_monte_carlo():
    t = np.cos(np.pi * RngStream(17).uniform(10**7))
    v = -np.log(np.abs(3 - t))
    mc, se = v.mean(), v.std() / math.sqrt(v.size)
    got = equilibrium_potential(3.0)
    assert abs(got - mc) < 4 * se
    assert got == pytest.approx(math.log(2) - math.log(3 + math.sqrt(8)), abs=1e-14)
    assert got == pytest.approx(-1.0696, abs=1e-4)


@pytest.mark.parametrize("z", [3.0, -2.5, 1.5 + 0.5j, 0.3j, -0.7 + 0.01j])
def test_potential_against_quadrature(z):
    ref = theta_quad(lambda t: -math.log(abs(z - t)))
    assert equilibrium_potential(z) == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("kappa,ref", [(4, math.log(1 / 3)), (100, math.log(9 / 11))])
def test_rate_value(kappa, ref):
    cls = ConditionClass.from_kappa(kappa)
    assert rate_value(cls) == pytest.approx(ref, abs=1e-12)
    z0 = -(kappa + 1) / (kappa - 1)
    assert abs(rate_value(cls) - (equilibrium_potential(z0) - math.log(2))) <= 1e-12


def test_reference_value_kappa_200():
    assert ConditionClass.from_kappa(200).log_racc() == pytest.approx(-0.1416578, abs=1e-7)


@pytest.mark.parametrize("lam", [1.0, 2.7, 4.0, 4.5, 0.5, 9.0])
def test_log_rate_closed_form_against_quadrature(lam):
    assert log_rate_at(C4, lam) == pytest.approx(oracle_log_rate(C4, lam), abs=1e-7)


def test_log_rate_at_zero_curvature_is_zero():
    assert log_rate_at(C4, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_flipped_closed_form_is_flat_on_interval():
    vals = flipped_log_rate_at(C4, np.linspace(1, 4, 13))
    np.testing.assert_allclose(vals, math.log(1 / 3), atol=1e-14)


@pytest.mark.parametrize("cls", [C4, C100], ids=["k4", "k100"])
def test_equalization_quadrature(cls):
    res = [equalization_residual(cls, grid=101, nodes=n).max_abs for n in (10**4, 10**5, 10**6)]
    assert res[2] <= 1e-4
    assert res[0] > res[1] > res[2]


def test_deviation_outside_interval():
    lam = 4.5
    rep = equalization_residual(C4, nodes=10**5, points=[lam])
    z = (2 * lam - 5) / 3
    ref = -math.log(abs(z) - math.sqrt(z * z - 1))
    assert rep.deviations[0] == pytest.approx(ref, abs=1e-6)
    assert rep.deviations[0] > 0


def test_flipped_equalization_both_routes():
    rep = equalization_residual(C4, FlippedArcsineDist(C4), grid=11, samples=10**6,
                                rng=RngStream(5))
    assert np.all(np.abs(rep.deviations) <= 4 * rep.stderr)
    q = equalization_residual(C4, FlippedArcsineDist(C4), grid=11, nodes=10**5, method="quadrature")
    assert q.max_abs <= 1e-4


def test_residual_csv(tmp_path):
    rep = equalization_residual(C4, grid=5, nodes=1000)
    rows = list(csv.reader(rep.to_csv(tmp_path / "r.csv").open()))
    assert rows[0] == ["lambda", "deviation"] and len(rows) == 6
    with pytest.raises(ParameterError):
        equalization_residual(C4, grid=1)


def uniform_oracle(cls, lam):
    m, M = cls.m, cls.M

    def F(b):
        d = b - lam
        t = 0.0 if d == 0 else d * math.log(abs(d))
        return t - b * math.log(b)

    return (F(M) - F(m)) / (M - m)


def test_non_arcsine_candidates_are_worse():
    arc = non_arcsine_is_worse(C4, ArcsineDist(C4), nodes=10**5)
    assert abs(arc.margin) <= 1e-4
    pm = non_arcsine_is_worse(C4, PointMass(2.5))
    assert pm.value == pytest.approx(math.log(3 / 5), abs=1e-14)
    assert pm.margin == pytest.approx(math.log(3 / 5) - math.log(1 / 3), abs=1e-14)
    uni = non_arcsine_is_worse(C4, UniformDist(1, 4), nodes=10**5, grid=201)
    ref = max(uniform_oracle(C4, l) for l in np.linspace(1, 4, 201))
    assert uni.value == pytest.approx(ref, abs=1e-4)
    assert uni.margin > 0.1


def test_inexact_slowdown_values():
    assert inexact_slowdown(C4, 0.0) == 1.0
    a = 1 + 2 * 4 * 0.01 / 3
    naive = 1 / (a - math.sqrt(a * a - 1))
    assert inexact_slowdown(C4, 0.01) == pytest.approx(naive, rel=1e-12)
    assert inexact_slowdown(C4, 0.01) == pytest.approx(1.2591413, abs=1e-7)
    with pytest.raises(ParameterError):
        inexact_slowdown(C4, -0.1)


@given(st.floats(0, 1.0), st.floats(1e-6, 1.0))
def test_inexact_slowdown_monotone(e1, de):
    assert inexact_slowdown(C4, e1 + de) > inexact_slowdown(C4, e1)


def test_inexact_slowdown_small_eps_expansion():
    ratios = []
    for eps in (1e-3, 1e-4, 1e-5, 1e-6):
        et = 2 * 4 * eps / 3
        ratios.append((inexact_slowdown(C4, eps) - 1 - math.sqrt(2 * et)) / et)
    assert max(abs(r) for r in ratios) < 2
    assert inexact_slowdown(C4, 1e-12) == pytest.approx(1.0, abs=1e-5)


def test_inexact_slowdown_matches_outside_deviation():
    eps = 0.01
    lam = 4 * (1 + eps)
    assert math.log(inexact_slowdown(C4, eps)) == pytest.approx(
        log_rate_at(C4, lam) - C4.log_racc(), abs=1e-12)


def test_game_value_at_equilibrium():
    mc = game_payoff(ArcsineDist(C4), FlippedArcsineDist(C4), samples=10**6, rng=RngStream(2))
    assert abs(mc.value - math.log(1 / 3)) <= 4 * mc.stderr
    q = game_payoff(ArcsineDist(C4), FlippedArcsineDist(C4), nodes=1000)
    assert q.value == pytest.approx(math.log(1 / 3), abs=1e-4)


def test_game_collision_is_divergent_not_an_error():
    p = game_payoff(PointMass(2.5), PointMass(2.5), samples=100, rng=RngStream(1))
    assert p.divergent and p.value == -math.inf
    q = game_payoff(PointMass(2.5), PointMass(2.5), nodes=1)
    assert q.divergent


def test_game_arcsine_against_point_curvature():
    p = game_payoff(ArcsineDist(C4), PointMass(1.0), nodes=10**5)
    assert p.value == pytest.approx(math.log(1 / 3), abs=1e-4)


def test_saddle_inequalities_for_random_candidates():
    gen = RngStream(31).generator
    target = C4.log_racc()
    for _ in range(20):
        k = gen.integers(1, 6)
        cand = Discrete(gen.uniform(1, 4, k), gen.uniform(0.1, 1, k))
        nu_side = game_payoff(ArcsineDist(C4), cand, nodes=20000)
        mu_side = game_payoff(cand, FlippedArcsineDist(C4), nodes=20000)
        assert nu_side.value <= target + 1e-3
        assert mu_side.value >= target - 1e-3


def test_game_mc_requires_rng():
    with pytest.raises(ParameterError):
        game_payoff(ArcsineDist(C4), FlippedArcsineDist(C4), samples=10)


@pytest.mark.parametrize("cls", [C4, C100], ids=["k4", "k100"])
def test_factor_variance_against_quadrature(cls):
    c, r = cls.center, cls.radius
    for lam in (cls.m, cls.M):
        mean = theta_quad(lambda t: math.log(abs(1 - lam / (c + r * t))))
        sq = theta_quad(lambda t: math.log(abs(1 - lam / (c + r * t))) ** 2)
        v = factor_variance(cls, lam, 10**6)
        assert v == pytest.approx(sq - mean**2, abs=2e-3)
        assert v < VARIANCE_BOUND
