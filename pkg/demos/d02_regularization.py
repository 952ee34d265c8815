"""
Regularizing a delta potential
==============================

Convolves a point mass with a bump mollifier at shrinking scales. With the
linear scale law the peak grows like 1/eps; with the log-type law it grows
only like log(1/eps).
"""
import math

import numpy as np

from kpde.grid import GridSpec
from kpde.regularization import MollifierSpec, PotentialSpec, fit_power_law, sup_norm_trace, smallest_resolvable_eps

spec = GridSpec(1, 4.0, 8192)
delta = PotentialSpec.delta(0.0)
eps = [2.0**-j for j in range(1, 7)]

for law in ("linear", "log"):
    m = MollifierSpec(law, N_q=1.0)
    trace = sup_norm_trace(delta, m, eps, spec)
    print(f"\n{law} scale law (smallest resolvable eps on this grid: {smallest_resolvable_eps(m, spec):.2e})")
    print("   eps       l(eps)     sup q_eps   sup / log(1/eps)")
    for e, s, l in trace:
        print(f"  {e:.5f}  {l:.5f}  {s:10.4f}  {s / math.log(1 / e):8.4f}")
    fit = fit_power_law(eps, [s for _, s, _ in trace])
    print(f"  power-law fit: sup ~ {fit.C:.3f} eps^-{fit.N:.3f}")

# a bounded potential is barely changed by the mollifier
cos_q = PotentialSpec.bounded_fn(lambda x: np.cos(math.pi * x / 4))
lin = MollifierSpec("linear")
print("\nsup of cos(pi x/R) after mollifying:", [round(s, 6) for _, s, _ in sup_norm_trace(cos_q, lin, eps, spec)])
