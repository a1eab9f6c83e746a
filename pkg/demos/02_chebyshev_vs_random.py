"""Chebyshev(n) stepsizes vs i.i.d. Arcsine stepsizes on quadratics.

The Chebyshev schedule has worst-case n-step rate (2 rho^n / (1 + rho^(2n)))^(1/n), which
approaches Racc from below as n grows and does not depend on the order of the steps. Its
inverse stepsizes fill out the Arcsine law, which is what the random schedule samples.
"""
from arcstep import ConditionClass, ScheduleSpec, chebyshev_rate_closed_form, worst_case_quadratic_rate
from arcstep.schedules import empirical_measure, total_variation_to_arcsine

cls = ConditionClass.from_kappa(100)
print(f"kappa=100, Racc = {cls.racc():.6f}")
for n in (2, 16, 64, 256):
    spec = ScheduleSpec.chebyshev(cls, n)
    grid = worst_case_quadratic_rate(1 / spec.inverse_stepsizes(), cls)
    rev = worst_case_quadratic_rate(1 / ScheduleSpec.chebyshev(cls, n, "reversed").inverse_stepsizes(), cls)
    print(f"n={n:4d}  grid max {grid:.8f}  closed form {chebyshev_rate_closed_form(cls, n):.8f}"
          f"  reversed order {rev:.8f}")

print("\nTV distance of Chebyshev inverse stepsizes to Arcsine (50 bins):")
for n in (100, 1000, 10000):
    h = empirical_measure(ScheduleSpec.chebyshev(cls, n), n)
    print(f"n={n:6d}  TV = {total_variation_to_arcsine(h, cls):.4f}")
