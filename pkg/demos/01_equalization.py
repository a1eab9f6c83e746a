"""Arcsine stepsizes equalize the per-step log factor across the whole curvature interval.

For beta ~ Arcsine(m, M), E log|1 - lambda/beta| is the same for every lambda in [m, M]
and equals log Racc = log((sqrt(kappa)-1)/(sqrt(kappa)+1)). Outside the interval the
expected factor grows like the logarithmic potential of the interval.
"""
import numpy as np

from arcstep import ConditionClass, equalization_residual, equilibrium_potential, log_rate_at

cls = ConditionClass(1.0, 4.0)
rep = equalization_residual(cls, grid=11, nodes=10**5)
print(f"kappa={cls.kappa():g}  log Racc = {cls.log_racc():.6f}")
print("lambda     deviation from log Racc")
for lam, dev in zip(rep.points, rep.deviations):
    print(f"{lam:6.3f}     {dev:+.2e}")

print("\nOutside [m, M] the rate worsens:")
for lam in (0.5, 4.5, 6.0):
    print(f"lambda={lam:4.1f}  E log factor = {log_rate_at(cls, lam):+.4f}")

z = np.array([0.0, 0.5, 3.0])
print("\nEquilibrium potential of [-1, 1] at z =", z, "->", np.round(equilibrium_potential(z), 5))
