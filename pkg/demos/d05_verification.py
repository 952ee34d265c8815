"""
Uniqueness and consistency checks, then sampling
================================================

Runs the remaining verification checks. The Monte Carlo part uses a
reduced sample count so the demo finishes in a few seconds.
"""
from kpde.config import preset_config
from kpde.experiment import build_problem, build_schedule
from kpde.regularization import MollifierSpec
from kpde.verification import ProbeSet, consistency_check, monte_carlo_check, uniqueness_check

# two mollifiers differing by eps^8 times a bump give solutions that differ negligibly
cfg = preset_config("uniqueness-negligible")
problem = build_problem(cfg)
pair = (MollifierSpec("log", N_q=1.0), MollifierSpec("log", N_q=1.0, perturbation_power=8.0))
u = uniqueness_check(problem, pair, build_schedule(cfg))
print(f"uniqueness: potential rate {u.potential_fit.rate:.3f}, solution rate {u.solution_fit.rate:.3f} "
      f"(needs {u.required_rate:.3f}) -> {u.verdict}")

# an O(1) change of the mollifier is outside the hypothesis
o1 = uniqueness_check(problem, (pair[0], MollifierSpec("log", N_q=1.0, perturbation_power=0.0)), build_schedule(cfg))
print("O(1) perturbation ->", o1.verdict)

# for a continuous potential the regularized solutions approach the classical one
cfg = preset_config("consistency-cos")
c = consistency_check(build_problem(cfg), MollifierSpec("linear"), build_schedule(cfg))
for e, err in zip(c.eps, c.errors):
    print(f"  eps = {e:.5f}  error {err:.3e}")
print("consistency ->", c.verdict)

# chaos mean and variance against direct sampling of the random inputs
cfg = preset_config("linear-gaussian")
problem = build_problem(cfg)
probes = ProbeSet.grid([0.1, 0.3, 0.5], [[-1.0], [0.0], [1.0]])
mc = monte_carlo_check(problem, 2000, cfg.verification.seed, probes)
print(f"Monte Carlo, 2000 samples: max |z| mean {abs(mc.z_mean).max():.2f}, "
      f"variance {abs(mc.z_variance).max():.2f} -> {mc.verdict}")
