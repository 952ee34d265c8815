"""
Deterministic parabolic solver
==============================

Strang splitting of ``u_t = u_xx - q u + f`` on a periodic box. Heat
eigenmodes come out exact to roundoff. With a bounded potential the
solution stays under the a-priori bound and the time error is second order.
"""
import math

import numpy as np

from kpde.grid import GridSpec
from kpde.parabolic import OperatorSpec, apriori_bound, solve_deterministic, source_l1_norms

lap = OperatorSpec.laplacian()
spec = GridSpec(1, math.pi, 256)
x = spec.axis

for k in (1, 2, 4):
    u = solve_deterministic(lap, np.zeros(spec.shape), np.sin(k * x), 0.5, 1e-3, spec=spec)
    err = spec.l2_norm(u.values[-1] - math.exp(-k * k * 0.5) * np.sin(k * x))
    print(f"k = {k}: L2 error at T {err:.2e}")

# a potential bounded by 3 and a time-periodic source
q = 3 * np.cos(x) * np.sin(2 * x) / np.max(np.abs(np.cos(x) * np.sin(2 * x)))
g = np.exp(-x**2)
f = lambda t: np.cos(3 * t) * np.exp(-(x - 1) ** 2)
u = solve_deterministic(lap, q, g, 0.5, 0.01, f=f, spec=spec)
bound = apriori_bound(lap, np.max(np.abs(q)), u.times, spec.l2_norm(g), source_l1_norms(f, spec, u.times), spec)
print("\n  t     ||u||     bound")
for i in range(0, len(u.times), 10):
    print(f" {u.times[i]:.2f}  {u.l2_norms()[i]:.5f}  {bound[i]:.5f}")

# halving dt divides the error by about four
ref = solve_deterministic(lap, q, g, 0.5, 1e-4, f=f, spec=spec).values[-1]
prev = None
for dt in (0.05, 0.025, 0.0125):
    e = spec.l2_norm(solve_deterministic(lap, q, g, 0.5, dt, f=f, spec=spec).values[-1] - ref)
    print(f"dt = {dt:<7} error {e:.3e}" + (f"  ratio {prev / e:.2f}" if prev else ""))
    prev = e
