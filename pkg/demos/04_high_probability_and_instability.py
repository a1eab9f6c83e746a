"""The rate holds with high probability, but not in expectation.

With n >= (pi^2+1) d / (delta eps^2) steps, R_n exceeds e^eps Racc with probability at
most delta. Meanwhile the mean of x_n/x_0 on (M/2)x^2 is (1 - sqrt(kappa))^n, which
explodes: a rate stated in expectation would hide the typical behaviour.
"""
from arcstep import ConditionClass
from arcstep.experiments import hp_sample_size, hp_validation, instability_demo

cls = ConditionClass(1.0, 4.0)
print("n* for d=1, eps=0.3, delta=0.1:", hp_sample_size(1, 0.3, 0.1))
a = hp_validation(cls, 1, 0.3, 0.1, runs=2000, seed=3).aggregates
print(f"failure frequency {a['failure_frequency']:.4f} (threshold {a['threshold']:.4f})")

a = instability_demo(ConditionClass.from_kappa(9), 3, runs=10**5, seed=4).aggregates
print(f"\nkappa=9, n=3: E[x3/x0] = {a['mean_ratio']:.3f} +- {a['mean_ratio_stderr']:.3f}"
      f" (theory -8), E|x3/x0|^(1/3) = {a['mean_abs_ratio_root']:.3f} (sqrt(kappa)-1 = 2)")
