import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arcstep.distributions import ConditionClass, ParameterError, RngStream
from arcstep.objectives import (
    InexactGradientModel,
    LogCoshComponent,
    PiecewiseQuadraticComponent,
    QuadraticComponent,
    RadialObjective,
    SeparableObjective,
    check_commuting_hessians,
    fd_hessian,
    inexact_gradient,
    log_sum_exp_example,
    logcosh_benchmark,
    objective_from_dict,
    radial_benchmark,
    random_rotation,
)

C = ConditionClass.from_kappa(10)


def fd_grad(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def benchmarks():
    return [
        logcosh_benchmark(C, 4),
        logcosh_benchmark(C, 4, rotation=3),
        radial_benchmark(C, (3, 2), rotation=5),
        SeparableObjective.quadratic([0.1, 0.5, 1.0], rotation=2, minimizer=[1.0, -2.0, 0.5]),
        SeparableObjective([PiecewiseQuadraticComponent([-1.0, 0.5], [0.2, 1.0, 0.4], 0.3),
                            LogCoshComponent(0.1, 1.0, -1.0)], rotation=7),
    ]


@pytest.mark.parametrize("obj", benchmarks(), ids=repr)
def test_gradient_matches_finite_differences(obj):
    gen = RngStream(1).generator
    for _ in range(3):
        x = obj.minimizer + gen.standard_normal(obj.dim) * 1.5
        np.testing.assert_allclose(obj.gradient(x), fd_grad(obj.value, x), atol=2e-6)
        assert np.allclose(obj.gradient(obj.minimizer), 0, atol=1e-12)


@pytest.mark.parametrize("obj", benchmarks(), ids=repr)
def test_curvature_ratios_lie_in_class(obj):
    gen = RngStream(2).generator
    x = obj.minimizer + 3 * gen.standard_normal((50, obj.dim))
    lam = obj.diag_ratio(obj.to_diag(x))
    assert np.all(lam >= obj.cls.m * (1 - 1e-12)) and np.all(lam <= obj.cls.M * (1 + 1e-12))


def test_ratio_times_offset_is_gradient_in_diagonal_basis():
    obj = logcosh_benchmark(C, 3, rotation=4)
    x = obj.minimizer + np.array([0.3, -2.0, 1e-3])
    u = obj.to_diag(x)
    gd = obj.rotation @ obj.gradient(x)
    np.testing.assert_allclose(gd, obj.curvature_ratio(x) * u, rtol=1e-12)


def test_excluded_coordinates_are_nan():
    obj = logcosh_benchmark(C, 2)
    lam = obj.curvature_ratio(np.array([0.0, 1.0]))
    assert np.isnan(lam[0]) and C.m < lam[1] < C.M


def test_logcosh_ratio_limit_at_zero():
    c = LogCoshComponent(0.1, 1.0)
    assert float(c.ratio(0.0)) == 1.0
    assert float(c.ratio(1e-12)) == pytest.approx(1.0)
    assert float(c.ratio(1e-3)) == pytest.approx(0.1 + 0.9 * np.tanh(1e-3) / 1e-3, rel=1e-14)
    assert float(c.ratio(1e6)) == pytest.approx(0.1, rel=1e-5)


@given(st.floats(-5, 5))
def test_piecewise_component_is_c1(u):
    c = PiecewiseQuadraticComponent([-1.0, 0.5, 2.0], [0.3, 1.0, 0.2, 0.7])
    h = 1e-6
    num = (c.value(u + h) - c.value(u - h)) / (2 * h)
    assert float(c.derivative(u)) == pytest.approx(num, abs=1e-5)
    assert 0.2 <= float(c.ratio(u)) <= 1.0


def test_piecewise_anchor_and_rejects_bad_input():
    c = PiecewiseQuadraticComponent([0.0], [1.0, 3.0])
    assert float(c.value(0.0)) == 0.0 and float(c.derivative(0.0)) == 0.0
    assert float(c.value(2.0)) == pytest.approx(6.0) and float(c.value(-2.0)) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        PiecewiseQuadraticComponent([1.0, 0.0], [1, 1, 1])
    with pytest.raises(ParameterError):
        PiecewiseQuadraticComponent([1.0], [1.0])


def test_declared_class_must_contain_components():
    with pytest.raises(ParameterError):
        SeparableObjective([QuadraticComponent(5.0)], cls=ConditionClass(1, 4))
    assert SeparableObjective.quadratic([1.0, 4.0]).cls == ConditionClass(1, 4)


def test_rotation_is_orthogonal_and_validated():
    U = random_rotation(6, 11)
    np.testing.assert_allclose(U @ U.T, np.eye(6), atol=1e-12)
    with pytest.raises(ParameterError):
        SeparableObjective.quadratic([1.0, 2.0], rotation=np.ones((2, 2)))


def test_hessian_matches_finite_differences():
    obj = logcosh_benchmark(C, 3, rotation=9)
    x = obj.minimizer + np.array([0.4, -0.7, 1.2])
    np.testing.assert_allclose(obj.hessian(x), fd_hessian(obj.value, x), atol=1e-5)


@pytest.mark.parametrize("obj", benchmarks(), ids=repr)
def test_dict_round_trip(obj):
    again = objective_from_dict(obj.to_dict())
    x = obj.minimizer + 0.37
    assert again.value(x) == pytest.approx(obj.value(x), rel=1e-12)
    np.testing.assert_allclose(again.gradient(x), obj.gradient(x), rtol=1e-12, atol=1e-15)


def test_radial_ratio_is_shared_within_block():
    obj = radial_benchmark(C, (3, 2))
    lam = obj.diag_ratio(np.array([1.0, 2.0, 2.0, 0.1, 0.0]))
    assert lam[0] == lam[1] == lam[2] and lam[3] == lam[4]
    assert lam[0] == pytest.approx(0.1 + 0.9 * np.tanh(3.0) / 3.0)


@given(st.sampled_from([0.0, 1e-6, 0.01, 0.2, 0.5]), st.integers(0, 1000))
@settings(max_examples=40)
def test_inexact_gradient_error_is_relative(eps, seed):
    obj = logcosh_benchmark(C, 3, rotation=1)
    x = obj.minimizer + 1.0
    g = obj.gradient(x)
    for mode in ("overestimate", "underestimate", "random"):
        gt = inexact_gradient(InexactGradientModel(eps, mode), obj, x, RngStream(seed))
        assert np.linalg.norm(gt - g) <= (eps * (1 + 1e-12) + 1e-15) * np.linalg.norm(g)


def test_inexact_model_validation():
    with pytest.raises(ParameterError):
        InexactGradientModel(-0.1)
    with pytest.raises(ParameterError):
        InexactGradientModel(0.1, "sideways")
    with pytest.raises(ParameterError):
        InexactGradientModel(0.1, "random").perturb(np.ones(2))


def test_commute_check_passes_on_rotated_separable():
    for obj in (logcosh_benchmark(C, 4, rotation=3),
                SeparableObjective.quadratic([0.1, 0.4, 1.0], rotation=8)):
        probes = obj.minimizer + 2 * RngStream(0).generator.standard_normal((5, obj.dim))
        rep = check_commuting_hessians(obj.value, probes, M=obj.cls.M)
        assert rep.consistent_with_separable, rep.to_dict()


def test_log_sum_exp_counterexample():
    f, hess = log_sum_exp_example()
    a, b = np.array([0.0, 0.0]), np.array([1.0, -0.5])
    np.testing.assert_allclose(fd_hessian(f, a), hess(a), atol=1e-6)
    # analytic commutator of the two Hessians
    Ha, Hb = hess(a), hess(b)
    ref = np.linalg.norm(Ha @ Hb - Hb @ Ha, 2)
    rep = check_commuting_hessians(f, [a, b])
    assert rep.max_commutator == pytest.approx(ref, rel=1e-4)
    assert rep.max_commutator > 10 * rep.tolerance
    assert rep.verdict == "not separable"


def test_commute_check_needs_two_probes():
    with pytest.raises(ParameterError):
        check_commuting_hessians(lambda v: float(v @ v), [np.zeros(2)])


def test_radial_requires_positive_block_sizes():
    with pytest.raises(ParameterError):
        RadialObjective([])
