"""Robustness to gradient errors, and best-of-p parallel runs.

A relative gradient error eps slows the rate by a closed-form factor, and an adversary
that always overestimates the gradient attains it. Running p copies and restarting from
the best iterate every k steps improves the rate by about sigma sqrt(2 log p / k).
"""
import math

from arcstep import ConditionClass, inexact_slowdown
from arcstep.experiments import inexact_tightness, parallel_best_of_p

cls = ConditionClass(1.0, 4.0)
target = math.log(inexact_slowdown(cls, 0.01) * cls.racc())
for mode in ("overestimate", "underestimate", "random"):
    a = inexact_tightness(cls, 0.01, 10**4, runs=10, seed=5, mode=mode).aggregates
    print(f"{mode:13s} mean log R_n {a['mean_log_rate']:+.5f}   bound {target:+.5f}")

a = parallel_best_of_p(ConditionClass.from_kappa(100), 64, 1000, 1000, runs=10, seed=6).aggregates
print(f"\np=64, k=n=1000: improvement {a['realized_improvement']:.4f}"
      f" vs predicted {a['predicted_improvement']:.4f}")
