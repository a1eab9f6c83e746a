import math

import numpy as np
import pytest

from arcstep.distributions import ConditionClass, ParameterError, RngStream
from arcstep.schedules import (
    ScheduleExhausted,
    ScheduleSpec,
    ScheduleStream,
    arcsine_bin_masses,
    chebyshev_inverse_stepsizes,
    empirical_measure,
    next_stepsize,
    total_variation_to_arcsine,
)

C4 = ConditionClass(1, 4)


def test_chebyshev_two_nodes():
    b = chebyshev_inverse_stepsizes(C4, 2)
    r = 1.5 / math.sqrt(2)
    np.testing.assert_allclose(b, [2.5 + r, 2.5 - r], rtol=1e-15)
    np.testing.assert_allclose(chebyshev_inverse_stepsizes(C4, 2, "reversed"), b[::-1])
    np.testing.assert_allclose(chebyshev_inverse_stepsizes(C4, 2, [1, 0]), b[::-1])


def test_chebyshev_single_node_is_center():
    assert chebyshev_inverse_stepsizes(C4, 1)[0] == pytest.approx(2.5, abs=1e-15)


def test_bad_permutation():
    with pytest.raises(ParameterError):
        ScheduleSpec.chebyshev(C4, 3, [0, 0, 1])
    with pytest.raises(ParameterError):
        ScheduleSpec.chebyshev(C4, 3, "shuffled")
    with pytest.raises(ParameterError):
        ScheduleSpec.chebyshev(C4, 0)


def test_constant_schedule_and_convergence_threshold():
    s = ScheduleSpec.constant(C4, 0.4)
    assert s.convergent
    assert not ScheduleSpec.constant(C4, 0.6).convergent
    st = ScheduleStream(s)
    assert next_stepsize(st) == pytest.approx(0.4)
    np.testing.assert_allclose(st.take(3), 0.4)
    with pytest.raises(ParameterError):
        ScheduleSpec.constant(C4, 0.0)


def test_finite_schedule_exhausts():
    st = ScheduleStream(ScheduleSpec.chebyshev(C4, 3))
    st.take(2)
    assert st.remaining() == 1
    st.take(1)
    with pytest.raises(ScheduleExhausted):
        st.take(1)


def test_arcsine_stream_needs_rng_and_is_block_invariant():
    spec = ScheduleSpec.iid_arcsine(C4)
    with pytest.raises(ParameterError):
        ScheduleStream(spec)
    a = ScheduleStream(spec, RngStream(4, 1))
    one = np.array([1 / a.next_stepsize() for _ in range(20)])
    b = ScheduleStream(spec, RngStream(4, 1))
    blocks = np.concatenate([b.take_inverse(7), b.take_inverse(13)])
    np.testing.assert_allclose(one, blocks, rtol=1e-15)
    assert np.all((blocks >= 1) & (blocks <= 4))


@pytest.mark.parametrize("spec", [
    ScheduleSpec.constant(C4, 0.4),
    ScheduleSpec.chebyshev(C4, 5, "reversed"),
    ScheduleSpec.chebyshev(C4, 3, [2, 0, 1]),
    ScheduleSpec.iid_arcsine(C4),
])
def test_json_round_trip(spec):
    again = ScheduleSpec.from_json(spec.to_json())
    assert again == spec


def test_arcsine_bin_masses_sum_to_one():
    edges = np.linspace(1, 4, 11)
    q = arcsine_bin_masses(C4, edges)
    assert q.sum() == pytest.approx(1.0, abs=1e-14)
    # symmetric law: mirror bins carry equal mass
    np.testing.assert_allclose(q, q[::-1], atol=1e-14)


def test_single_node_tv_is_one_minus_center_bin_mass():
    cls = ConditionClass(1, 10)
    h = empirical_measure(ScheduleSpec.chebyshev(cls, 1), 1, bins=51)
    q = arcsine_bin_masses(cls, h.edges)
    j = int(np.flatnonzero(h.counts)[0])
    assert total_variation_to_arcsine(h, cls) == pytest.approx(1 - q[j], abs=1e-14)


def test_tv_shrinks_with_length():
    cls = ConditionClass(1, 10)
    tv = [total_variation_to_arcsine(empirical_measure(ScheduleSpec.chebyshev(cls, n), n), cls)
          for n in (10, 100, 1000, 10000)]
    assert all(b < a for a, b in zip(tv, tv[1:]))


def test_iid_measure_and_length_checks():
    h = empirical_measure(ScheduleSpec.iid_arcsine(C4), 20000, 20, RngStream(2))
    assert total_variation_to_arcsine(h, C4) < 0.03
    assert h.outside == 0
    with pytest.raises(ParameterError):
        empirical_measure(ScheduleSpec.chebyshev(C4, 5), 4)
    with pytest.raises(ParameterError):
        empirical_measure(ScheduleSpec.iid_arcsine(C4), 0, rng=RngStream(1))
