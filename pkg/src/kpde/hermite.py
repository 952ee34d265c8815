"""Hermite polynomials, Hermite functions and Fourier-Hermite polynomials.

Polynomials follow the probabilists' convention, ``E[h_n(Z)^2] = n!`` for
standard normal ``Z``. With that normalization the L2(μ) norm of
``Σ c_γ H_γ`` is ``Σ c_γ^2 γ!``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .multi_index import MultiIndex

#: Block size used by :func:`sample_matrix`; part of the reproducibility contract.
SAMPLE_BLOCK = 1024


def hermite_poly(n: int, x):
    """Probabilists' Hermite polynomial ``h_n(x)`` by three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for m in range(1, n):
        h_prev, h = h, x * h - m * h_prev
    return h if h.ndim else float(h)


def hermite_functions(kmax: int, t) -> np.ndarray:
    """Hermite functions ``ξ_1 .. ξ_kmax`` at ``t``, stacked on axis 0.

    Uses the orthonormal recurrence
    ``ξ_{k+1} = sqrt(2/k) t ξ_k - sqrt((k-1)/k) ξ_{k-1}``,
    which avoids factorials and stays stable well beyond k = 200.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    t = np.asarray(t, dtype=float)
    out = np.empty((kmax,) + t.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * t * t)
    if kmax > 1:
        out[1] = np.sqrt(2.0) * t * out[0]
    for k in range(2, kmax):
        out[k] = np.sqrt(2.0 / k) * t * out[k - 1] - np.sqrt((k - 1) / k) * out[k - 2]
    return out


def hermite_function(k: int, t):
    """Hermite function of order ``k >= 1``; ``ξ_1(t) = π^{-1/4} e^{-t²/2}``."""
    if k < 1:
        raise ValueError("Hermite functions are indexed from k = 1")
    val = hermite_functions(k, t)[k - 1]
    return val if np.ndim(val) else float(val)


@dataclass(frozen=True)
class GaussianSample:
    """One realization of the Gaussian coordinates ``<ω, ξ_k>``, k = 1..K."""

    z: np.ndarray
    seed: int
    index: int = 0

    @property
    def dim(self):
        return len(self.z)


def eval_fourier_hermite(gamma: MultiIndex, z):
    """``H_γ(z) = ∏_k h_{γ_k}(z_k)``.

    ``z`` may be a :class:`GaussianSample`, a 1-d vector, or an ``(n, K)``
    array of samples (evaluated row-wise).
    """
    if isinstance(z, GaussianSample):
        z = z.z
    z = np.asarray(z, dtype=float)
    dim = z.shape[-1]
    if gamma.max_position > dim:
        raise ValueError(
            f"index {gamma} needs {gamma.max_position} Gaussian coordinates, sample has {dim}"
        )
    out = np.ones(z.shape[:-1])
    for k, c in gamma.entries:
        out = out * hermite_poly(c, z[..., k - 1])
    return out if out.ndim else float(out)


def sample_matrix(K: int, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. N(0, I_K) rows, reproducible from ``seed``.

    Rows are drawn in fixed blocks, each from its own Philox stream keyed
    by ``(seed, block)``. Any slice of rows can therefore be regenerated
    independently of how the work is split.
    """
    if K < 1 or n < 1:
        raise ValueError("need K >= 1 and n >= 1")
    root = np.random.SeedSequence(seed)
    nblocks = -(-n // SAMPLE_BLOCK)
    blocks = []
    for child in root.spawn(nblocks):
        rng = np.random.Generator(np.random.Philox(child))
        blocks.append(rng.standard_normal((SAMPLE_BLOCK, K)))
    return np.concatenate(blocks)[:n]


def draw_samples(K: int, n: int, seed: int) -> list[GaussianSample]:
    mat = sample_matrix(K, n, seed)
    return [GaussianSample(row, seed, i) for i, row in enumerate(mat)]
