import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpde.chaos import StochasticData
from kpde.grid import GridField, GridSpec
from kpde.multi_index import MultiIndex, TruncationSet
from kpde.parabolic import OperatorSpec
from kpde.regularization import MollifierSpec, PotentialSpec, UnderResolvedError, regularize
from kpde.verification import (
    FAIL,
    HYPOTHESIS_NOT_MET,
    PASS,
    EpsilonSchedule,
    ProbeSet,
    SolutionNet,
    StochasticProblem,
    build_very_weak_net,
    consistency_check,
    moderateness_check,
    monte_carlo_check,
    monte_carlo_oracle,
    uniqueness_check,
)

from conftest import gaussian_initial

LAP = OperatorSpec.laplacian()
LOG1 = MollifierSpec("log", N_q=1.0)
LINEAR = MollifierSpec("linear")


def _problem(potential, spec=GridSpec(1, 8.0, 512), force=None, initial=None, trunc=TruncationSet(2, 5)):
    return StochasticProblem(LAP, potential,
                             StochasticData.time_white_noise(5) if force is None else force,
                             gaussian_initial() if initial is None else initial,
                             spec, 0.5, 0.01, trunc)


def _cos_problem(R=4.0, n=4096):
    return _problem(PotentialSpec.bounded_fn(lambda x: np.cos(np.pi * x / R)), GridSpec(1, R, n))


def test_schedule_validation():
    s = EpsilonSchedule.dyadic(1, 4)
    assert s.values == (0.5, 0.25, 0.125, 0.0625)
    for bad in ((), (0.5, 0.5), (0.25, 0.5), (1.5, 0.5), (0.5, 0.0)):
        with pytest.raises(ValueError):
            EpsilonSchedule(bad)


def test_net_of_bounded_potential_matches_direct_solves():
    pb = _problem(PotentialSpec.bounded_fn(lambda x: np.cos(np.pi * x / 8)), trunc=TruncationSet(1, 5))
    sched = EpsilonSchedule((1.0, 0.5, 0.25))
    net = build_very_weak_net(pb, LINEAR, sched)
    assert len(net.members) == 3 and net.potential is pb.potential
    for e, U in zip(sched, net.members):
        direct = pb.solve(regularize(pb.potential, LINEAR, e, pb.grid))
        assert set(direct.coefficients) == set(U.coefficients)
        for g in U.coefficients:
            np.testing.assert_allclose(U[g].values, direct[g].values, atol=1e-8)


def test_delta_net_has_no_higher_order_coefficients(delta_noise_problem):
    net = build_very_weak_net(delta_noise_problem, LOG1, EpsilonSchedule.dyadic(1, 5))
    for U in net.members:
        assert len(U.coefficients) == 6
        assert max(g.order for g in U.coefficients) == 1


def test_zero_data_net_is_zero():
    pb = _problem(PotentialSpec.delta(0.0), force=StochasticData.zero(), initial=StochasticData.zero())
    net = build_very_weak_net(pb, LOG1, EpsilonSchedule.dyadic(1, 3))
    assert all(not U.coefficients for U in net.members)
    rep = moderateness_check(net, 1.1)
    assert rep.verdict == PASS and rep.norms == [0.0, 0.0, 0.0]


def test_net_reports_smallest_admissible_eps(delta_noise_problem):
    with pytest.raises(UnderResolvedError) as info:
        build_very_weak_net(delta_noise_problem, LOG1, EpsilonSchedule.dyadic(1, 9))
    assert "smallest admissible" in str(info.value)
    assert 2.0**-9 < info.value.smallest_eps < 2.0**-5


def test_net_parallel_bitwise(delta_noise_problem):
    sched = EpsilonSchedule.dyadic(1, 4)
    a = build_very_weak_net(delta_noise_problem, LOG1, sched, threads=1)
    b = build_very_weak_net(delta_noise_problem, LOG1, sched, threads=4)
    for U, V in zip(a.members, b.members):
        for g in U.coefficients:
            assert U[g].values.tobytes() == V[g].values.tobytes()


def test_moderateness_rejects_p_at_most_one(delta_noise_problem):
    net = build_very_weak_net(delta_noise_problem, LOG1, EpsilonSchedule.dyadic(1, 3))
    with pytest.raises(ValueError, match="p > 1"):
        moderateness_check(net, 1.0)


# fitted on schedule 2^-1..2^-5 (the fast preset grid) and frozen
DELTA_NET_NORMS = [1.5955519803518796, 1.5965515607028624, 1.5968947626132544,
              1.5970708728303291, 1.5971861697929208]


def test_moderateness_delta_net(delta_noise_problem):
    net = build_very_weak_net(delta_noise_problem, LOG1, EpsilonSchedule.dyadic(1, 5))
    r = moderateness_check(net, 1.1)
    np.testing.assert_allclose(r.norms, DELTA_NET_NORMS, rtol=1e-12)
    assert r.verdict == PASS
    assert r.exponent_bound == pytest.approx(0.5)  # M N_q T
    assert r.fit.N <= r.exponent_bound + 0.5
    assert r.fit.residual < 0.25


def test_moderateness_delta_six_points():
    spec = GridSpec(1, 8.0, 1024)
    pb = _problem(PotentialSpec.delta(0.0), spec)
    r = moderateness_check(build_very_weak_net(pb, LOG1, EpsilonSchedule.dyadic(1, 6)), 1.1)
    assert r.verdict == PASS
    assert r.fit.N <= 1.0


def test_moderateness_bounded_potential_is_flat():
    r = moderateness_check(build_very_weak_net(_cos_problem(), LINEAR, EpsilonSchedule.dyadic(1, 6)), 1.1)
    assert abs(r.fit.N) < 0.1
    assert r.verdict == PASS


def _planted(net, N0):
    members = [U.scaled(e ** (-N0)) for e, U in zip(net.schedule, net.members)]
    return SolutionNet(net.schedule, members, net.potentials, net.potential, net.mollifier)


def test_moderateness_planted_exponent():
    pb = _problem(PotentialSpec.bounded_fn(lambda x: 0.3 + 0 * x), trunc=TruncationSet(1, 5))
    net = build_very_weak_net(pb, LINEAR, EpsilonSchedule((1.0, 0.6, 0.35, 0.2)))
    r = moderateness_check(_planted(net, 2.0), 1.1)
    assert r.fit.N == pytest.approx(2.0, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 6))
def test_moderateness_recovers_any_planted_exponent(N0):
    pb = _problem(PotentialSpec.bounded_fn(lambda x: 0.3 + 0 * x), GridSpec(1, 8.0, 256),
                  trunc=TruncationSet(1, 2), force=StochasticData.time_white_noise(2),
                  initial=gaussian_initial(2))
    net = build_very_weak_net(pb, LINEAR, EpsilonSchedule((1.0, 0.75, 0.5)))
    assert moderateness_check(_planted(net, N0), 1.1).fit.N == pytest.approx(N0, abs=1e-6)


def test_uniqueness_identical_mollifiers_exact_zero(delta_noise_problem):
    r = uniqueness_check(delta_noise_problem, (LOG1, LOG1), EpsilonSchedule.dyadic(1, 5))
    assert r.potential_differences == [0.0] * 5
    assert r.solution_differences == [0.0] * 5
    assert r.verdict == PASS


# measured by running both nets and frozen
UNIQ_POTENTIAL_RATE = 7.999984424587383
UNIQ_SOLUTION_RATE = 8.020610228011108


def test_uniqueness_negligible_perturbation(delta_noise_problem):
    mt = MollifierSpec("log", N_q=1.0, perturbation_power=8.0)
    r = uniqueness_check(delta_noise_problem, (LOG1, mt), EpsilonSchedule.dyadic(1, 5))
    assert r.potential_fit.negligible
    assert r.potential_fit.rate == pytest.approx(UNIQ_POTENTIAL_RATE, rel=1e-9)
    assert r.solution_fit.rate == pytest.approx(UNIQ_SOLUTION_RATE, rel=1e-6)
    assert r.required_rate == pytest.approx(UNIQ_POTENTIAL_RATE - 0.5 - 0.5)
    assert r.solution_fit.rate >= 8 - 0.5 - 0.5
    assert r.verdict == PASS


def test_uniqueness_order_one_difference_hypothesis_not_met(delta_noise_problem):
    mt = MollifierSpec("log", N_q=1.0, perturbation_power=0.0)
    r = uniqueness_check(delta_noise_problem, (LOG1, mt), EpsilonSchedule.dyadic(1, 5))
    assert r.verdict == HYPOTHESIS_NOT_MET
    assert not r.potential_fit.negligible
    assert r.solution_differences == []


def test_uniqueness_slow_difference_hypothesis_not_met(delta_noise_problem):
    mt = MollifierSpec("log", N_q=1.0, perturbation_power=3.0)
    assert uniqueness_check(delta_noise_problem, (LOG1, mt), EpsilonSchedule.dyadic(1, 5)).verdict == HYPOTHESIS_NOT_MET


def test_consistency_zero_potential_exact():
    pb = _problem(PotentialSpec.bounded_fn(lambda x: 0 * x))
    r = consistency_check(pb, LINEAR, EpsilonSchedule.dyadic(0, 2))
    assert r.errors == [0.0] * 3
    assert r.verdict == PASS


def test_consistency_constant_potential():
    pb = _problem(PotentialSpec.bounded_fn(lambda x: 1.5 + 0 * x), GridSpec(1, 8.0, 2048))
    r = consistency_check(pb, LINEAR, EpsilonSchedule.dyadic(1, 4))
    assert max(r.errors) < 1e-8


# U_ε built from the closed form q_ε = cos(πx/R) ∫φ(y)cos(πεy/R)dy (quad), then frozen
COS_ERRORS = [0.003376122114396287, 0.0008458154907508795, 0.00021156552541401168,
              5.2898361110730064e-05, 1.3225026535471784e-05, 3.3062839004839307e-06]


def test_consistency_cos():
    r = consistency_check(_cos_problem(), LINEAR, EpsilonSchedule.dyadic(1, 6), s=1.1, tol=1e-2)
    np.testing.assert_allclose(r.errors, COS_ERRORS, rtol=1e-3)
    assert r.strictly_decreasing
    assert r.errors[-1] < 1e-2
    assert r.verdict == PASS


def test_consistency_refuses_singular(delta_noise_problem):
    with pytest.raises(ValueError, match="bounded continuous"):
        consistency_check(delta_noise_problem, LOG1, EpsilonSchedule.dyadic(1, 3))


def test_consistency_fails_on_loose_tolerance():
    r = consistency_check(_cos_problem(), LINEAR, EpsilonSchedule.dyadic(1, 3), tol=1e-6)
    assert r.verdict == FAIL


def _lg_problem(n=128):
    spec = GridSpec(1, 8.0, n)
    initial = StochasticData.gaussian(lambda x: np.exp(-x**2), [lambda x: 0.5 * np.exp(-(x - 1) ** 2)])
    return StochasticProblem(LAP, PotentialSpec.bounded_fn(lambda x: np.cos(np.pi * x / 8)),
                             StochasticData.time_white_noise(3), initial, spec, 0.5, 0.01, TruncationSet(1, 3))


PROBES = ProbeSet.grid([0.1, 0.2, 0.3, 0.4, 0.5], [-2, -1, 0, 1, 2])


def test_mc_deterministic_data_zero_variance():
    pb = _problem(PotentialSpec.bounded_fn(lambda x: np.cos(x)), GridSpec(1, 8.0, 64),
                  force=StochasticData.zero(), initial=StochasticData.deterministic(lambda x: np.exp(-x**2)),
                  trunc=TruncationSet(1, 2))
    est = monte_carlo_oracle(pb, 300, 1, PROBES)
    assert np.all(est.variance == 0)
    assert np.all(est.se_mean == 0)
    r = monte_carlo_check(pb, 300, 1, PROBES)
    assert r.verdict == PASS


def test_mc_matches_chaos_small():
    r = monte_carlo_check(_lg_problem(), 2000, 7, PROBES)
    assert r.verdict == PASS
    assert np.max(np.abs(r.z_mean)) <= 3 and np.max(np.abs(r.z_variance)) <= 3


def test_mc_reproducible_and_parallel_bitwise():
    pb = _lg_problem(64)
    a = monte_carlo_oracle(pb, 600, 3, PROBES, threads=1)
    b = monte_carlo_oracle(pb, 600, 3, PROBES, threads=3)
    assert a.mean.tobytes() == b.mean.tobytes()
    assert a.variance.tobytes() == b.variance.tobytes()
    c = monte_carlo_oracle(pb, 600, 4, PROBES)
    assert c.mean.tobytes() != a.mean.tobytes()


def test_mc_detects_wrong_chaos_statistics():
    # drop the initial fluctuation from the MC problem only: the variance must disagree
    pb = _lg_problem()
    wrong = StochasticProblem(pb.op, pb.potential, pb.force,
                              StochasticData.gaussian(lambda x: np.exp(-x**2), [lambda x: 0.9 * np.exp(-(x - 1) ** 2)]),
                              pb.grid, pb.T, pb.dt, pb.trunc)
    U_est = monte_carlo_oracle(wrong, 2000, 7, PROBES)
    r = monte_carlo_check(pb, 2000, 7, PROBES)
    z = (U_est.variance - r.chaos_variance) / U_est.se_variance
    assert np.max(np.abs(z)) > 3
