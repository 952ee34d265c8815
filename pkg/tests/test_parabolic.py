import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from kpde.grid import GridField, GridSpec
from kpde.parabolic import (
    OperatorSpec,
    Trajectory,
    apriori_bound,
    solve_deterministic,
    source_l1_norms,
    time_mesh,
    trajectory_norms,
)

LAP = OperatorSpec.laplacian()


def _eigen_setup(k, n=256):
    spec = GridSpec(1, math.pi, n)
    return spec, np.sin(k * spec.axis)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_eigenmode_exact(k):
    spec, g = _eigen_setup(k)
    u = solve_deterministic(LAP, np.zeros(spec.shape), g, 0.5, 1e-3, spec=spec)
    exact = np.exp(-k * k * u.times)[:, None] * g[None, :]
    err = np.sqrt(np.sum((u.values - exact) ** 2, axis=1) * spec.dx)
    assert err.max() < 1e-10


@pytest.mark.parametrize("k,c", [(1, 0.7), (3, 2.0), (2, -0.5)])
def test_constant_potential_exact(k, c):
    spec, g = _eigen_setup(k)
    u = solve_deterministic(LAP, np.full(spec.shape, c), g, 0.5, 1e-2, spec=spec)
    exact = np.exp(-(k * k + c) * 0.5) * g
    assert spec.l2_norm(u.values[-1] - exact) < 1e-10


def test_bilaplacian_eigenmode():
    spec, g = _eigen_setup(2)
    u = solve_deterministic(OperatorSpec.bilaplacian(), np.zeros(spec.shape), g, 0.1, 1e-3, spec=spec)
    assert spec.l2_norm(u.values[-1] - math.exp(-16 * 0.1) * g) < 1e-10


def _semidiscrete_generator(spec, op, q):
    # dense matrix of (L - q) acting on grid values
    n = spec.n
    eye = np.eye(n)
    L = np.array([spec.ifft(op.symbol(spec) * spec.fft(eye[i])) for i in range(n)]).T
    return L - np.diag(q)


def test_matches_matrix_exponential_and_is_second_order():
    R = 8.0
    spec = GridSpec(1, R, 128)
    x = spec.axis
    q = np.cos(np.pi * x / R)
    g = np.exp(-(x**2))
    A = _semidiscrete_generator(spec, LAP, q)
    ref = expm(0.5 * A) @ g
    errs = []
    for dt in (0.02, 0.01, 0.005, 0.0025):
        u = solve_deterministic(LAP, q, g, 0.5, dt, spec=spec)
        errs.append(spec.l2_norm(u.values[-1] - ref))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.8 < r < 4.2 for r in ratios), ratios
    fine = solve_deterministic(LAP, q, g, 0.5, 1e-4, spec=spec)
    assert spec.l2_norm(fine.values[-1] - ref) < 1e-6


def test_self_refinement_order_two():
    R = 8.0
    spec = GridSpec(1, R, 256)
    q = np.cos(np.pi * spec.axis / R)
    g = np.exp(-(spec.axis**2))
    oracle = solve_deterministic(LAP, q, g, 0.5, 1e-4, spec=spec).values[-1]
    e1 = spec.l2_norm(solve_deterministic(LAP, q, g, 0.5, 0.01, spec=spec).values[-1] - oracle)
    e4 = spec.l2_norm(solve_deterministic(LAP, q, g, 0.5, 0.0025, spec=spec).values[-1] - oracle)
    assert 14 < e1 / e4 < 18  # (dt / (dt/4))^2 = 16


def test_source_term_second_order():
    # u' = -c u + sin(t), spatially constant: closed form
    spec = GridSpec(1, 4.0, 16)
    c = 1.5
    f = lambda t: np.full(spec.shape, math.sin(t))
    exact = lambda t: (c * math.sin(t) - math.cos(t) + math.exp(-c * t)) / (1 + c * c)
    errs = []
    for dt in (0.02, 0.01, 0.005):
        u = solve_deterministic(LAP, np.full(spec.shape, c), np.zeros(spec.shape), 1.0, dt, f=f, spec=spec)
        errs.append(abs(u.values[-1][0] - exact(1.0)))
    assert all(3.8 < a / b < 4.2 for a, b in zip(errs, errs[1:]))


def test_rejects_bad_input():
    spec = GridSpec(1, 4.0, 16)
    g = np.zeros(spec.shape)
    q = np.zeros(spec.shape)
    q[3] = np.inf
    with pytest.raises(ValueError):
        solve_deterministic(LAP, q, g, 1.0, 0.1, spec=spec)
    with pytest.raises(ValueError):
        solve_deterministic(LAP, np.zeros(spec.shape), g, 1.0, 0.0, spec=spec)
    with pytest.raises(ValueError):
        solve_deterministic(LAP, np.zeros(spec.shape), g, 1.0, 0.3, spec=spec)
    with pytest.raises(ValueError):
        solve_deterministic(LAP, np.zeros(16), np.zeros(16), 1.0, 0.1)


def test_time_mesh():
    t = time_mesh(0.5, 0.1)
    assert len(t) == 6 and t[-1] == 0.5
    assert np.all(np.diff(t) > 0)


def test_apriori_examples():
    assert apriori_bound(LAP, 0.0, 3.7, 1.0, 0.0) == 1.0
    assert apriori_bound(LAP, 2.0, 1.0, 1.0, 0.0) == pytest.approx(math.e**2)
    assert apriori_bound(LAP, 2.0, 1.0, 1.0, 0.0) == pytest.approx(7.389, abs=1e-3)
    with pytest.raises(ValueError):
        apriori_bound(LAP, -1.0, 1.0, 1.0, 0.0)


def test_growth_bound():
    spec = GridSpec(1, 4.0, 64)
    assert LAP.growth_bound() == 0.0
    assert LAP.growth_bound(spec) == 0.0
    assert OperatorSpec.bilaplacian().growth_bound(spec) == 0.0
    assert OperatorSpec.polynomial([0.5, -1.0]).growth_bound(spec) == 0.5
    with pytest.raises(ValueError):
        OperatorSpec.polynomial([0.0, 1.0, -1.0]).growth_bound()


def test_eigenmode_norms_and_bound():
    spec, g = _eigen_setup(2)
    u = solve_deterministic(LAP, np.zeros(spec.shape), g, 0.5, 1e-3, spec=spec)
    norms, sup = trajectory_norms(u)
    gn = spec.l2_norm(g)
    np.testing.assert_allclose(norms, np.exp(-4 * u.times) * gn, rtol=0, atol=1e-10)
    assert sup == pytest.approx(gn)
    assert np.all(norms <= apriori_bound(LAP, 0.0, u.times, gn, 0.0))


def test_trajectory_norm_examples():
    spec = GridSpec(1, 4.0, 16)
    z = Trajectory.zeros(spec, [0, 0.5, 1.0])
    assert np.all(trajectory_norms(z)[0] == 0)
    v = np.full(spec.shape, 2.0 / math.sqrt(8.0))  # L2 norm 2 on a box of length 8
    const = Trajectory(spec, [0, 0.5, 1.0], np.stack([v, v, v]))
    assert trajectory_norms(const)[1] == pytest.approx(2.0)


def test_zero_data_gives_zero():
    spec = GridSpec(1, 4.0, 64)
    q = np.cos(spec.axis)
    u = solve_deterministic(LAP, q, np.zeros(spec.shape), 0.5, 0.01, spec=spec)
    assert np.all(u.values == 0)


def test_nonnegativity_preserved():
    spec = GridSpec(1, 8.0, 256)
    x = spec.axis
    q = 2 * np.cos(x) ** 2 - 1
    u = solve_deterministic(LAP, q, np.exp(-(x**2)), 0.5, 0.01,
                            f=lambda t: np.exp(-((x - 1) ** 2)) * (1 + math.sin(t)), spec=spec)
    assert u.values.min() > -1e-12


def _random_trig(rng, spec, amp):
    x = spec.axis
    ks = rng.integers(1, 6, size=3)
    cs = rng.uniform(-1, 1, size=3)
    ph = rng.uniform(0, 2 * np.pi, size=3)
    q = sum(c * np.cos(k * np.pi * x / spec.R + p) for c, k, p in zip(cs, ks, ph))
    return amp * q / np.max(np.abs(q))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec(1, 8.0, 128)
    q = _random_trig(rng, spec, 2.0)
    g1, g2 = rng.standard_normal((2, spec.n))
    a1, a2 = rng.standard_normal((2, spec.n))
    f1 = lambda t: np.sin(3 * t) * a1
    f2 = lambda t: t * a2
    u1 = solve_deterministic(LAP, q, g1, 0.2, 0.02, f=f1, spec=spec)
    u2 = solve_deterministic(LAP, q, g2, 0.2, 0.02, f=f2, spec=spec)
    u12 = solve_deterministic(LAP, q, g1 + g2, 0.2, 0.02, f=lambda t: f1(t) + f2(t), spec=spec)
    np.testing.assert_allclose(u12.values, u1.values + u2.values, rtol=0, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 3.0))
def test_apriori_bound_holds(seed, amp):
    rng = np.random.default_rng(seed)
    spec = GridSpec(1, 8.0, 128)
    q = _random_trig(rng, spec, amp)
    g = np.exp(-((spec.axis - rng.uniform(-2, 2)) ** 2))
    a = rng.standard_normal(spec.n)
    f = lambda t: math.cos(2 * t) * a
    u = solve_deterministic(LAP, q, g, 0.5, 0.01, f=f, spec=spec)
    bound = apriori_bound(LAP, np.max(np.abs(q)), u.times, spec.l2_norm(g), source_l1_norms(f, spec, u.times))
    assert np.all(u.l2_norms() <= bound * (1 + 1e-6))


def test_source_l1_norms_constant_source():
    spec = GridSpec(1, 4.0, 16)
    v = np.full(spec.shape, 0.5)
    t = time_mesh(1.0, 0.25)
    np.testing.assert_allclose(source_l1_norms(lambda s: v, spec, t), t * spec.l2_norm(v), rtol=1e-14)
    assert np.all(source_l1_norms(None, spec, t) == 0)


def test_two_dimensional_eigenmode():
    spec = GridSpec(2, math.pi, 32)
    x, y = spec.coords
    g = np.sin(x) * np.cos(2 * y)
    u = solve_deterministic(LAP, np.zeros(spec.shape), g, 0.3, 0.01, spec=spec)
    assert spec.l2_norm(u.values[-1] - math.exp(-5 * 0.3) * g) < 1e-10
