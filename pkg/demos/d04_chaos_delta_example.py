"""
Chaos expansion for a delta potential with white-noise forcing
===============================================================

Solves the propagator system for a time-white-noise force and a Gaussian
initial condition. Only the mean and the K first-order coefficients are
nonzero, at every regularization scale.
"""
from kpde.config import preset_config
from kpde.experiment import build_problem, build_schedule
from kpde.regularization import MollifierSpec
from kpde.verification import build_very_weak_net, moderateness_check

cfg = preset_config("example-sec4")
problem = build_problem(cfg)
net = build_very_weak_net(problem, MollifierSpec("log", N_q=1.0), build_schedule(cfg))

K = problem.trunc.max_dim
for e, U in zip(net.schedule, net.members):
    print(f"eps = {e:.5f}: {len(U.coefficients)} coefficients, "
          f"||U||_(-1.1) = {U.kondratiev_norm(1.1):.5f}, tail {U.tail_indicator():.2e}")

U = net.members[-1]
print("\ncoefficient X-norms at the smallest eps:")
for g in U.ordered():
    print(f"  {g.dense(K)}  {U[g].sup_l2():.5f}")

mean, var = U.mean_variance()
print("\nvariance at t = T, x = 0:", var.values[-1][problem.grid.nearest_index([0.0])])

r = moderateness_check(net, 1.1, T=problem.T, M=problem.op.M)
print(f"\nmoderateness: norm ~ {r.fit.C:.4f} eps^-{r.fit.N:.5f}, residual {r.fit.residual:.1e} -> {r.verdict}")
