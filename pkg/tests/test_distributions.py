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
    QuadratureSingularityError,
    RngStream,
    UniformDist,
    arcsine_cdf,
    arcsine_sample,
    deterministic_sum,
    expect_monte_carlo,
    expect_quadrature,
)

classes = st.tuples(
    st.floats(0.01, 10.0), st.floats(1.05, 500.0)
).map(lambda t: ConditionClass(t[0], t[0] * t[1]))


def test_condition_class_validation():
    with pytest.raises(ParameterError, match="require m < M"):
        ConditionClass(4, 1)
    with pytest.raises(ParameterError, match="require m < M"):
        ConditionClass(2, 2)
    with pytest.raises(ParameterError):
        ConditionClass(0, 1)
    with pytest.raises(ParameterError):
        ConditionClass(1, math.inf)
    with pytest.raises(ParameterError):
        ConditionClass.from_kappa(1.0)


def test_accelerated_rate_values():
    assert ConditionClass(1, 4).racc() == pytest.approx(1 / 3, abs=1e-15)
    assert ConditionClass.from_kappa(100).log_racc() == pytest.approx(math.log(9 / 11), abs=1e-15)
    c = ConditionClass.from_kappa(10)
    assert (c.m, c.M) == (0.1, 1.0)


@given(classes, st.floats(0.0, 1.0))
def test_cdf_matches_integrated_density(cls, frac):
    d = ArcsineDist(cls)
    b = cls.m + frac * (cls.M - cls.m)
    # substitution b = c + r cos(theta) removes the endpoint singularities
    val, _ = integrate.quad(lambda th: 1 / math.pi, math.acos(np.clip((b - d.c) / d.r, -1, 1)), math.pi)
    # acos is sqrt-sensitive at -1, so the oracle itself carries ~1e-8 error at the ends
    assert float(d.cdf(b)) == pytest.approx(val, abs=1e-7)


def test_cdf_against_scipy_quad_of_density():
    cls = ConditionClass(1, 4)
    d = ArcsineDist(cls)
    for b in (1.3, 2.5, 3.9):
        val, _ = integrate.quad(d.density, 1, b, limit=200)
        assert float(d.cdf(b)) == pytest.approx(val, abs=1e-7)


def test_cdf_outside_support():
    d = ArcsineDist(ConditionClass(1, 4))
    assert arcsine_cdf(d, 0.5) == 0.0
    assert arcsine_cdf(d, 1.0) == 0.0
    assert arcsine_cdf(d, 4.0) == 1.0
    assert arcsine_cdf(d, 7.0) == 1.0
    assert float(d.density(0.5)) == 0.0


@given(classes, st.floats(1e-3, 1 - 1e-3))
def test_quantile_inverts_cdf(cls, u):
    d = ArcsineDist(cls)
    assert float(d.cdf(d.quantile(u))) == pytest.approx(u, abs=1e-9)


def test_median_is_center():
    cls = ConditionClass(1, 4)
    assert float(ArcsineDist(cls).quantile(0.5)) == pytest.approx(2.5, abs=1e-15)


@given(classes, st.integers(0, 2**32))
@settings(max_examples=25)
def test_samples_stay_in_support(cls, seed):
    x = ArcsineDist(cls).sample(RngStream(seed), 1000)
    assert np.all((x >= cls.m) & (x <= cls.M))
    y = FlippedArcsineDist(cls).sample(RngStream(seed), 1000)
    assert np.all((y >= cls.m * (1 - 1e-12)) & (y <= cls.M * (1 + 1e-12)))


@pytest.mark.parametrize("m,M", [(1, 4), (0.01, 1), (2, 3)])
def test_mean_stepsize_quadrature(m, M):
    cls = ConditionClass(m, M)
    val = expect_quadrature(ArcsineDist(cls), lambda b: 1 / b, 1000)
    assert abs(val - 1 / math.sqrt(M * m)) <= 1e-6


def test_mean_stepsize_monte_carlo():
    cls = ConditionClass(1, 4)
    mean, se = expect_monte_carlo(ArcsineDist(cls), lambda b: 1 / b, 10**6, RngStream(11))
    assert abs(mean - 0.5) <= 4 * se


def test_chebyshev_rule_exact_for_polynomials():
    # moments of the Arcsine law on [-1, 1]: E t^2 = 1/2, E t^4 = 3/8, E t^6 = 5/16
    d = ArcsineDist(ConditionClass(1, 3))  # c = 2, r = 1
    for k, ref in [(2, 0.5), (4, 3 / 8), (6, 5 / 16)]:
        assert expect_quadrature(d, lambda b: (b - 2.0) ** k, 4) == pytest.approx(ref, abs=1e-14)


def test_quadrature_reports_singularity():
    d = ArcsineDist(ConditionClass(1, 3))
    with pytest.raises(QuadratureSingularityError) as e:
        expect_quadrature(d, lambda b: np.log(np.abs(b - 2.0)), 3)  # middle node is exactly 2
    assert e.value.index == 1
    assert e.value.node == pytest.approx(2.0)


def test_flipped_cdf_and_density():
    cls = ConditionClass(1, 4)
    f = FlippedArcsineDist(cls)
    val, _ = integrate.quad(f.density, 1, 2.2, limit=200)
    assert float(f.cdf(2.2)) == pytest.approx(val, abs=1e-7)
    assert float(f.cdf(1.0)) == pytest.approx(0.0, abs=1e-15)
    assert float(f.cdf(4.0)) == pytest.approx(1.0, abs=1e-15)
    x, w = f.quadrature(10)
    assert np.all((x > 1) & (x < 4)) and w.sum() == pytest.approx(1.0)


def test_rng_streams_are_reproducible_and_split():
    a = RngStream(5, 3).uniform(10)
    b = RngStream(5, 3).uniform(10)
    c = RngStream(5, 4).uniform(10)
    d = RngStream(5, 3).child(1).uniform(10)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    # same values whether drawn in a block or one at a time
    r = RngStream(9)
    one = np.array([r.uniform() for _ in range(50)])
    np.testing.assert_array_equal(one, RngStream(9).uniform(50))
    with pytest.raises(ParameterError):
        RngStream(-1)


def test_rng_stream_matches_seed_sequence_spawn():
    child = np.random.SeedSequence(42).spawn(3)[2]
    ref = np.random.Generator(np.random.PCG64(child)).random(5)
    np.testing.assert_array_equal(RngStream(42, 2).uniform(5), ref)


def test_arcsine_sample_scalar_and_point_mass():
    cls = ConditionClass(1, 4)
    assert 1 <= arcsine_sample(ArcsineDist(cls), RngStream(1)) <= 4
    assert PointMass(2.5).sample(RngStream(1)) == 2.5
    np.testing.assert_array_equal(PointMass(2.5).sample(RngStream(1), 3), [2.5] * 3)
    x, w = UniformDist(1, 4).quadrature(3)
    np.testing.assert_allclose(x, [1.5, 2.5, 3.5])


def test_deterministic_sum_large_input():
    v = RngStream(3).uniform(3 * 2**20 + 17)
    assert deterministic_sum(v) == pytest.approx(math.fsum(v), rel=1e-13)
    assert deterministic_sum(v) == deterministic_sum(v.copy())
