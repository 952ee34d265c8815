"""Mollifiers, mollifying nets and convolution regularization of potentials.

The mollifier is the standard bump ``φ(x) = c exp(-1/(1-|x|²))`` on the unit
ball, normalized to unit mass. A mollifying net rescales it,
``φ_ε(x) = l(ε)^{-d} φ(x / l(ε))``, and a regularized potential is
``q_ε = q * φ_ε``. Convolutions are circular, on the periodic grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy import integrate

from .grid import GridField, GridSpec

#: Tolerance on the discrete mass of a sampled mollifier.
MASS_TOLERANCE = 1e-3
#: Minimum number of grid cells per mollifier radius.
MIN_CELLS_PER_RADIUS = 2.0
#: Slope thresholds used by the negligibility test.
TESTED_POWERS = (1, 2, 3, 4)


class UnderResolvedError(ValueError):
    """The mollifier at this ε is too narrow for the grid."""

    def __init__(self, message, eps=None, smallest_eps=None):
        super().__init__(message)
        self.eps = eps
        self.smallest_eps = smallest_eps


def _bump_unnormalized(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@lru_cache(maxsize=None)
def bump_constant(d: int) -> float:
    """Normalizing constant ``c`` with ``∫ φ = 1`` in dimension ``d``."""
    if d == 1:
        mass = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1, 1,
                              epsabs=0.0, epsrel=1e-12, limit=200)[0]
    elif d == 2:
        mass = 2 * math.pi * integrate.quad(
            lambda r: r * math.exp(-1.0 / (1.0 - r * r)), 0, 1, epsabs=0.0, epsrel=1e-12, limit=200
        )[0]
    else:
        raise ValueError("only d = 1, 2 are supported")
    return 1.0 / mass


def bump_peak(d: int) -> float:
    """``φ(0) = c / e``."""
    return bump_constant(d) * math.exp(-1.0)


def bump(*coords) -> np.ndarray:
    """Evaluate the normalized bump at the given coordinate arrays."""
    r2 = sum(np.square(np.asarray(c, dtype=float)) for c in coords)
    return bump_constant(len(coords)) * _bump_unnormalized(np.asarray(r2, dtype=float))


@lru_cache(maxsize=None)
def _bump_derivative_fn(alpha: tuple[int, ...]):
    xs = sympy.symbols(f"x0:{len(alpha)}", real=True)
    r2 = sum(s**2 for s in xs)
    expr = sympy.exp(-1 / (1 - r2))
    for s, a in zip(xs, alpha):
        if a:
            expr = sympy.diff(expr, s, a)
    return sympy.lambdify(xs, sympy.simplify(expr), modules="numpy")


def bump_derivative(alpha: Sequence[int], *coords) -> np.ndarray:
    """``∂^α φ`` evaluated analytically; zero outside the unit ball."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != len(coords):
        raise ValueError("derivative order must match the dimension")
    if not any(alpha):
        return bump(*coords)
    coords = [np.asarray(c, dtype=float) for c in coords]
    r2 = sum(c * c for c in coords)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    fn = _bump_derivative_fn(alpha)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = fn(*[c[inside] for c in coords])
    out[inside] = np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
    return bump_constant(len(coords)) * out


@dataclass(frozen=True)
class PotentialSpec:
    """Potential ``q``: bounded function, Dirac delta, their sum, or ``∂^α f``.

    ``bounded`` and ``carrier`` are callables of the coordinate arrays;
    ``x0`` locates the delta.
    """

    kind: str
    x0: tuple[float, ...] | None = None
    bounded: Callable | None = None
    order: tuple[int, ...] | None = None
    carrier: Callable | None = None
    label: str = ""

    KINDS = ("bounded", "delta", "delta_plus_bounded", "finite_order")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("delta", "delta_plus_bounded") and self.x0 is None:
            raise ValueError("delta potentials need a location x0")
        if self.kind in ("bounded", "delta_plus_bounded") and self.bounded is None:
            raise ValueError(f"{self.kind} potential needs its bounded part")
        if self.kind == "finite_order" and (self.order is None or self.carrier is None):
            raise ValueError("finite_order potential needs order and carrier")

    @classmethod
    def bounded_fn(cls, fn, label=""):
        return cls("bounded", bounded=fn, label=label)

    @classmethod
    def delta(cls, x0=0.0, label="delta"):
        return cls("delta", x0=tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist()), label=label)

    @classmethod
    def delta_plus_bounded(cls, x0, fn, label=""):
        return cls("delta_plus_bounded", x0=tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist()),
                   bounded=fn, label=label)

    @classmethod
    def finite_order(cls, order, carrier, label=""):
        return cls("finite_order", order=tuple(int(a) for a in np.atleast_1d(order)),
                   carrier=carrier, label=label)

    @property
    def is_singular(self) -> bool:
        return self.kind != "bounded"

    def sample_bounded(self, spec: GridSpec) -> np.ndarray:
        """Bounded part sampled on the grid (defined for bounded kinds only)."""
        if self.bounded is None:
            raise ValueError(f"{self.kind} potential has no bounded part")
        vals = np.broadcast_to(np.asarray(self.bounded(*spec.coords), dtype=float), spec.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("bounded potential is not finite on the grid")
        return np.array(vals)

    def sample_carrier(self, spec: GridSpec) -> np.ndarray:
        vals = np.broadcast_to(np.asarray(self.carrier(*spec.coords), dtype=float), spec.shape)
        vals = np.array(vals)
        edge = max(np.max(np.abs(np.take(vals, [0, -1], axis=a))) for a in range(spec.d))
        if edge > 1e-10 * max(np.max(np.abs(vals)), 1e-300):
            raise ValueError("finite-order carrier must vanish near the box boundary")
        return vals


@dataclass(frozen=True)
class MollifierSpec:
    """Bump mollifier with a scale law ``l(ε)``.

    ``scale_law`` is ``"linear"`` (``l = ε``), ``"log"`` (``l`` chosen so that
    ``sup φ_ε = N_q log(1/ε)``), or a callable ``ε -> l``.
    An optional perturbation adds ``amplitude * ε^power * φ`` (unit scale,
    centred like the net) to every member; it is used to build a second,
    negligibly different net.
    """

    scale_law: str | Callable = "linear"
    N_q: float = 1.0
    perturbation_power: float | None = None
    perturbation_amplitude: float = 1.0

    def __post_init__(self):
        if not callable(self.scale_law) and self.scale_law not in ("linear", "log"):
            raise ValueError(f"unknown scale law {self.scale_law!r}")
        if self.N_q <= 0:
            raise ValueError("N_q must be positive")

    def scale(self, eps: float, d: int) -> float:
        if not 0 < eps <= 1:
            raise ValueError(f"ε must lie in (0, 1], got {eps}")
        if callable(self.scale_law):
            l = float(self.scale_law(eps))
        elif self.scale_law == "linear":
            l = float(eps)
        else:
            if eps >= 1:
                raise ValueError("log-type scaling needs ε < 1")
            l = (bump_peak(d) / (self.N_q * math.log(1.0 / eps))) ** (1.0 / d)
        if not l > 0:
            raise ValueError(f"scale l(ε) must be positive, got {l}")
        return l

    @property
    def log_bound_constant(self) -> float | None:
        """``N_q`` when the law guarantees ``sup |δ_ε| = N_q log(1/ε)``."""
        return self.N_q if self.scale_law == "log" else None

    def perturbation_weight(self, eps: float) -> float:
        if self.perturbation_power is None:
            return 0.0
        return self.perturbation_amplitude * eps**self.perturbation_power

    def to_dict(self):
        law = self.scale_law if isinstance(self.scale_law, str) else "custom"
        return {"scale_law": law, "N_q": self.N_q,
                "perturbation_power": self.perturbation_power,
                "perturbation_amplitude": self.perturbation_amplitude}


def _check_resolution(m: MollifierSpec, eps: float, spec: GridSpec) -> float:
    l = m.scale(eps, spec.d)
    if l < MIN_CELLS_PER_RADIUS * spec.dx:
        raise UnderResolvedError(
            f"mollifier scale l({eps:g}) = {l:.4g} is below {MIN_CELLS_PER_RADIUS:g} dx = "
            f"{MIN_CELLS_PER_RADIUS * spec.dx:.4g}; refine the grid or stop at "
            f"ε >= {smallest_resolvable_eps(m, spec):.4g}",
            eps=eps, smallest_eps=smallest_resolvable_eps(m, spec),
        )
    if l >= spec.R:
        raise ValueError(f"mollifier scale l({eps:g}) = {l:.4g} does not fit the box (R = {spec.R})")
    return l


def _resolved(m: MollifierSpec, eps: float, spec: GridSpec) -> bool:
    try:
        l = m.scale(eps, spec.d)
    except ValueError:
        return False
    if l < MIN_CELLS_PER_RADIUS * spec.dx or l >= spec.R:
        return False
    vals = bump(*(o / l for o in spec.offsets)) / l**spec.d
    return abs(spec.integral(vals) - 1.0) <= MASS_TOLERANCE


def smallest_resolvable_eps(m: MollifierSpec, spec: GridSpec) -> float:
    """Approximate smallest ε whose mollifier the grid still resolves."""
    # bisect in log ε between a resolved point and an unresolved one
    start = [-1e-9] + [-j * math.log(2) for j in range(1, 40)]
    hi = next((s for s in start if _resolved(m, math.exp(s), spec)), None)
    if hi is None:
        return float("nan")
    lo = -700.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _resolved(m, math.exp(mid), spec):
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def mollifying_net(m: MollifierSpec, eps: float, spec: GridSpec, x0=None) -> GridField:
    """Sample ``φ_ε(· - x0)`` on the grid (periodically wrapped).

    Raises :class:`UnderResolvedError` when ``l(ε) < 2 dx`` or when the
    discrete mass of the sample misses 1 by more than ``MASS_TOLERANCE``.
    """
    l = _check_resolution(m, eps, spec)
    disp = spec.displacement(np.zeros(spec.d) if x0 is None else x0)
    vals = bump(*(c / l for c in disp)) / l**spec.d
    mass = spec.integral(vals)
    if abs(mass - 1.0) > MASS_TOLERANCE:
        raise UnderResolvedError(
            f"sampled mollifier at ε = {eps:g} has discrete mass {mass:.6f}; "
            f"refine the grid or stop at ε >= {smallest_resolvable_eps(m, spec):.4g}",
            eps=eps, smallest_eps=smallest_resolvable_eps(m, spec),
        )
    w = m.perturbation_weight(eps)
    if w:
        vals = vals + w * bump(*disp)
    return GridField(spec, vals)


def _kernel(m: MollifierSpec, eps: float, spec: GridSpec, alpha=None, normalize=True):
    """Convolution kernel at grid offsets (origin at index 0)."""
    l = _check_resolution(m, eps, spec)
    scaled = [o / l for o in spec.offsets]
    if alpha is None or not any(alpha):
        main = bump(*scaled) / l**spec.d
        mass = spec.integral(main)
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise UnderResolvedError(
                f"sampled mollifier at ε = {eps:g} has discrete mass {mass:.6f}",
                eps=eps, smallest_eps=smallest_resolvable_eps(m, spec),
            )
        if normalize:
            main = main / mass
        pert = bump(*spec.offsets)
    else:
        main = bump_derivative(alpha, *scaled) / l ** (spec.d + sum(alpha))
        pert = bump_derivative(alpha, *spec.offsets)
    w = m.perturbation_weight(eps)
    return main + w * pert if w else main


def circular_convolve(values: np.ndarray, kernel: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Discrete ``∫ f(y) k(x - y) dy`` on the torus, by FFT."""
    return spec.ifft(spec.fft(values) * spec.fft(kernel)) * spec.cell_volume


def regularize(q: PotentialSpec, m: MollifierSpec, eps: float, spec: GridSpec) -> GridField:
    """Regularized potential ``q_ε = q * φ_ε`` on the grid.

    * delta: the translated mollifier itself, sampled exactly;
    * bounded part: circular convolution with the mollifier, renormalized
      to unit discrete mass so constants are reproduced to round-off;
    * finite order ``∂^α f``: ``f * ∂^α φ_ε``, the derivative moved onto
      the mollifier and evaluated analytically.
    """
    if q.kind == "delta":
        return mollifying_net(m, eps, spec, q.x0)
    if q.kind == "bounded":
        vals = circular_convolve(q.sample_bounded(spec), _kernel(m, eps, spec), spec)
        return GridField(spec, vals)
    if q.kind == "delta_plus_bounded":
        smooth = circular_convolve(q.sample_bounded(spec), _kernel(m, eps, spec), spec)
        return GridField(spec, mollifying_net(m, eps, spec, q.x0).values + smooth)
    alpha = q.order
    if len(alpha) != spec.d:
        raise ValueError(f"derivative order {alpha} does not match d = {spec.d}")
    kern = _kernel(m, eps, spec, alpha=alpha)
    return GridField(spec, circular_convolve(q.sample_carrier(spec), kern, spec))


def sup_norm_trace(q: PotentialSpec, m: MollifierSpec, schedule: Sequence[float],
                   spec: GridSpec) -> list[tuple[float, float, float]]:
    """``(ε, ||q_ε||_∞, l(ε))`` along a decreasing schedule."""
    eps = list(schedule)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("schedule must be strictly decreasing")
    out = []
    for e in eps:
        out.append((e, regularize(q, m, e, spec).sup_norm(), m.scale(e, spec.d)))
    return out


@dataclass
class ModeratenessFit:
    """Least-squares power law ``y ≈ C ε^{-N}``.

    ``residual`` is the largest log-space deviation over the data.
    ``negligible`` is set when the fitted decay is steeper than every
    tested power in ``tested_powers``.
    """

    C: float
    N: float
    residual: float
    negligible: bool
    tested_powers: tuple[int, ...] = field(default=TESTED_POWERS)

    @property
    def rate(self) -> float:
        """Decay exponent ``-N``."""
        return -self.N

    def bound(self, eps):
        return self.C * np.asarray(eps, dtype=float) ** (-self.N)

    def to_dict(self):
        return {"C": self.C, "N": self.N, "residual": self.residual,
                "negligible": self.negligible, "tested_powers": list(self.tested_powers)}


def fit_power_law(eps: Sequence[float], y: Sequence[float],
                  tested_powers: Sequence[int] = TESTED_POWERS) -> ModeratenessFit:
    """Fit ``log y = log C - N log ε`` by least squares."""
    eps = np.asarray(eps, dtype=float)
    y = np.asarray(y, dtype=float)
    if eps.shape != y.shape or eps.ndim != 1:
        raise ValueError("eps and y must be 1-d sequences of equal length")
    if len(eps) < 3:
        raise ValueError("need at least 3 points to fit a power law")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fit needs positive finite values")
    if np.any((eps <= 0) | (eps > 1)) or len(np.unique(eps)) != len(eps):
        raise ValueError("ε values must be distinct and in (0, 1]")
    le, ly = np.log(eps), np.log(y)
    A = np.column_stack([np.ones_like(le), -le])
    (logC, N), *_ = np.linalg.lstsq(A, ly, rcond=None)
    residual = float(np.max(np.abs(ly - (logC - N * le))))
    negligible = bool(all(-N > n for n in tested_powers))
    return ModeratenessFit(float(math.exp(logC)), float(N), residual, negligible,
                           tuple(int(n) for n in tested_powers))
