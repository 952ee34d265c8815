"""Chaos expansions of the stochastic data and the propagator system.

With a deterministic potential the equation for ``U = Σ u_γ H_γ`` splits
into one deterministic problem per multi-index,

    ∂_t u_γ - L u_γ + q u_γ = f_γ,    u_γ(0) = g_γ,

so a truncated solution is a collection of independent solves. Indices
whose data vanish have vanishing solutions and are simply not stored.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping

import numpy as np

from ._parallel import parallel_map
from .grid import GridField, GridSpec
from .hermite import GaussianSample, eval_fourier_hermite, hermite_function
from .multi_index import MultiIndex, TruncationSet, factorial, weight_2N
from .parabolic import OperatorSpec, Trajectory, solve_deterministic, time_mesh


class PropagatorError(RuntimeError):
    """A coefficient solve failed; ``gamma`` names the coefficient."""

    def __init__(self, gamma, message=None):
        if message is None:  # unpickling passes the formatted message only
            gamma, message = None, gamma
        else:
            message = f"coefficient {gamma}: {message}"
        super().__init__(message)
        self.gamma = gamma


# -- space-time sources ------------------------------------------------------

@dataclass
class SeparableSource:
    """``f(t, x) = temporal(t) · spatial(x)``."""

    temporal: Callable[[float], float]
    spatial: np.ndarray

    def __call__(self, t):
        return self.temporal(t) * self.spatial


@dataclass
class FunctionSource:
    """``f(t, x) = fn(t, *coords)`` broadcast onto the grid."""

    fn: Callable
    spec: GridSpec

    def __call__(self, t):
        return np.broadcast_to(np.asarray(self.fn(t, *self.spec.coords), dtype=float),
                               self.spec.shape)


@dataclass
class LinearCombination:
    """``Σ c_i f_i(t)``, used to realize a random source for one sample."""

    terms: list

    def __call__(self, t):
        out = 0.0
        for c, f in self.terms:
            out = out + c * f(t)
        return out


def _spatial(value, spec: GridSpec) -> np.ndarray:
    if isinstance(value, GridField):
        value = value.values
    if callable(value):
        value = value(*spec.coords)
    return np.array(np.broadcast_to(np.asarray(value, dtype=float), spec.shape))


def _space_time(value, spec: GridSpec):
    if callable(value):
        return FunctionSource(value, spec)
    return SeparableSource(_one, _spatial(value, spec))


def _one(t):
    return 1.0


# -- stochastic data ---------------------------------------------------------

@dataclass(frozen=True)
class StochasticData:
    """Chaos description of a random force ``F`` or initial condition ``G``.

    Fields are arrays or callables of the coordinates (initial data) or of
    ``(t, *coords)`` (forces).

    kinds: ``zero``, ``deterministic`` (``mean`` only), ``time_white_noise``
    (``f_{e(k)} = ξ_k(t)`` for ``k <= K``), ``gaussian`` (``mean`` plus
    ``fluctuations[k-1]`` at ``e(k)``) and ``table`` (explicit ``γ -> field``).
    """

    kind: str
    mean: object = None
    fluctuations: tuple = ()
    table: Mapping[MultiIndex, object] = field(default_factory=dict)
    K: int | None = None

    KINDS = ("zero", "deterministic", "time_white_noise", "gaussian", "table")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stochastic data kind {self.kind!r}")
        if self.kind == "deterministic" and self.mean is None:
            raise ValueError("deterministic data needs a field")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def deterministic(cls, value):
        return cls("deterministic", mean=value)

    @classmethod
    def time_white_noise(cls, K: int | None = None):
        return cls("time_white_noise", K=K)

    @classmethod
    def gaussian(cls, mean, fluctuations):
        return cls("gaussian", mean=mean, fluctuations=tuple(fluctuations))

    @classmethod
    def explicit(cls, table: Mapping[MultiIndex, object]):
        return cls("table", table=dict(table))

    def coefficient_fields(self, trunc: TruncationSet) -> dict[MultiIndex, object]:
        """Nonzero coefficients as raw field descriptions, keyed by γ."""
        if self.kind == "zero":
            return {}
        if self.kind == "deterministic":
            return {MultiIndex.zero(): self.mean}
        if self.kind == "time_white_noise":
            K = trunc.max_dim if self.K is None else self.K
            if K > trunc.max_dim:
                raise ValueError(f"white noise with K = {K} exceeds truncation dimension {trunc.max_dim}")
            return {MultiIndex.unit(k): ("white_noise", k) for k in range(1, K + 1)}
        if self.kind == "gaussian":
            if len(self.fluctuations) > trunc.max_dim:
                raise ValueError(f"{len(self.fluctuations)} Gaussian fluctuations exceed "
                                 f"truncation dimension {trunc.max_dim}")
            out = {}
            if self.mean is not None:
                out[MultiIndex.zero()] = self.mean
            for k, fl in enumerate(self.fluctuations, start=1):
                if fl is not None:
                    out[MultiIndex.unit(k)] = fl
            return out
        outside = [g for g in self.table if g not in trunc]
        if outside:
            raise ValueError(f"table entries outside the truncation: {', '.join(map(str, outside))}")
        return dict(self.table)


def expand_inputs(F: StochasticData, G: StochasticData, trunc: TruncationSet,
                  spec: GridSpec) -> tuple[dict, dict]:
    """Concrete coefficient families ``(f_γ, g_γ)``; absent entries are zero."""
    forces = {}
    for gamma, value in F.coefficient_fields(trunc).items():
        if isinstance(value, tuple) and value and value[0] == "white_noise":
            forces[gamma] = SeparableSource(partial(hermite_function, value[1]), np.ones(spec.shape))
        else:
            forces[gamma] = _space_time(value, spec)
    initials = {gamma: _spatial(value, spec) for gamma, value in G.coefficient_fields(trunc).items()}
    return forces, initials


# -- chaos fields -------------------------------------------------------------

@dataclass
class ChaosField:
    """Truncated expansion ``Σ u_γ H_γ``; absent coefficients are zero."""

    trunc: TruncationSet
    spec: GridSpec
    times: np.ndarray
    coefficients: dict[MultiIndex, Trajectory] = field(default_factory=dict)
    p: float = 0.0

    def ordered(self) -> list[MultiIndex]:
        return self.trunc.sort(self.coefficients)

    def __getitem__(self, gamma: MultiIndex) -> Trajectory:
        if gamma in self.coefficients:
            return self.coefficients[gamma]
        return Trajectory.zeros(self.spec, self.times)

    def x_norms(self) -> dict[MultiIndex, float]:
        return {g: self.coefficients[g].sup_l2() for g in self.ordered()}

    def _combine(self, other: "ChaosField", sign: float) -> "ChaosField":
        if other.spec != self.spec or other.trunc != self.trunc or not np.array_equal(other.times, self.times):
            raise ValueError("chaos fields live on different grids or truncations")
        coeffs = {}
        for g in self.trunc.sort(set(self.coefficients) | set(other.coefficients)):
            coeffs[g] = Trajectory(self.spec, self.times, self[g].values + sign * other[g].values)
        return ChaosField(self.trunc, self.spec, self.times, coeffs, self.p)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scaled(self, c: float) -> "ChaosField":
        return ChaosField(self.trunc, self.spec, self.times,
                          {g: u.scaled(c) for g, u in self.coefficients.items()}, self.p)

    def kondratiev_norm(self, p: float) -> float:
        return kondratiev_norm(self, p)

    def mean_variance(self) -> tuple[Trajectory, Trajectory]:
        return mean_variance(self)

    def tail_indicator(self) -> float:
        """Share of the variance carried by the outermost shell ``|γ| = P``."""
        total = shell = 0.0
        for g in self.ordered():
            if g.order == 0:
                continue
            c = factorial(g) * self.coefficients[g].sup_l2() ** 2
            total += c
            if g.order == self.trunc.max_order:
                shell += c
        return shell / total if total > 0 else 0.0


def kondratiev_norm(U: ChaosField, p: float) -> float:
    """Squared weighted norm ``Σ ||u_γ||²_X (2ℕ)^{-pγ}``, X = C([0,T]; L²).

    Summed in graded lexicographic order, so the result does not depend on
    how the coefficients were produced.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    total = 0.0
    for g in U.ordered():
        total += U.coefficients[g].sup_l2() ** 2 * weight_2N(g, p)
    return total


def mean_variance(U: ChaosField) -> tuple[Trajectory, Trajectory]:
    """Mean ``u_0`` and pointwise variance ``Σ_{|γ|>=1} γ! u_γ²``."""
    zero = MultiIndex.zero()
    mean = U[zero]
    var = np.zeros_like(mean.values)
    for g in U.ordered():
        if g.order:
            var += factorial(g) * np.square(U.coefficients[g].values)
    return mean, Trajectory(U.spec, U.times, var)


def sample_realization(U: ChaosField, z) -> Trajectory:
    """``Σ_γ u_γ H_γ(z)`` for one Gaussian sample."""
    zv = z.z if isinstance(z, GaussianSample) else np.asarray(z, dtype=float)
    if zv.ndim != 1 or len(zv) < U.trunc.max_dim:
        raise ValueError(f"sample dimension {zv.shape} is smaller than truncation dimension {U.trunc.max_dim}")
    out = np.zeros((len(U.times),) + U.spec.shape)
    for g in U.ordered():
        out += eval_fourier_hermite(g, zv) * U.coefficients[g].values
    return Trajectory(U.spec, U.times, out)


def solve_propagator(op: OperatorSpec, q, forces: Mapping, initials: Mapping,
                     trunc: TruncationSet, T: float, dt: float, spec: GridSpec,
                     threads: int | None = 1, p: float = 0.0) -> ChaosField:
    """One deterministic solve per multi-index with nonzero data."""
    times = time_mesh(T, dt)
    qv = q.values if isinstance(q, GridField) else np.broadcast_to(np.asarray(q, dtype=float), spec.shape)
    if not np.all(np.isfinite(qv)):
        raise ValueError("potential must be finite on the grid (regularize singular potentials first)")
    active = [g for g in trunc.sort(set(forces) | set(initials))
              if g in forces or np.any(initials[g])]
    zero_field = np.zeros(spec.shape)

    def solve(i):
        g = active[i]
        try:
            return solve_deterministic(op, qv, initials.get(g, zero_field), T, dt,
                                       f=forces.get(g), spec=spec)
        except (ValueError, FloatingPointError) as exc:
            raise PropagatorError(g, str(exc)) from exc

    results = parallel_map(solve, len(active), threads)
    return ChaosField(trunc, spec, times, dict(zip(active, results)), p)
