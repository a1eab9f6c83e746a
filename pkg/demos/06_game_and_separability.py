"""Game between stepsize law and curvature law, and the separability probe.

Against the flipped-Arcsine curvature law every stepsize law pays exactly log Racc, and
the Arcsine stepsize law pays log Racc against every curvature law: a saddle point.
The rate guarantee needs commuting Hessians, which a finite-difference probe detects.
"""
import numpy as np

from arcstep import ConditionClass
from arcstep.experiments import commute_check, lower_bound_game

cls = ConditionClass(1.0, 4.0)
rep = lower_bound_game(cls, samples=10**6, seed=8)
print(f"log Racc = {cls.log_racc():.5f}")
for name, v in rep.aggregates["candidates"].items():
    print(f"{name:18s} quadrature {v['quadrature']['value']:+.5f}  MC {v['monte_carlo']['value']:+.5f}")

for bench in ("logcosh", "lse"):
    a = commute_check(cls, bench, 4, rotation=1, probes=6, seed=9).aggregates
    print(f"{bench:8s} commutator/tolerance = {a['max_commutator'] / a['tolerance']:.2e}")
