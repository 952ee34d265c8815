"""Periodic grids on the box [-R, R)^d and fields sampled on them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` points per axis on ``[-R, R)^d``."""

    d: int
    R: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")

    @property
    def dx(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.R + self.dx * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, ``indexing='ij'``."""
        return tuple(np.meshgrid(*([self.axis] * self.d), indexing="ij"))

    @cached_property
    def offsets(self) -> tuple[np.ndarray, ...]:
        """Grid offsets ``m*dx`` wrapped into ``[-R, R)``, origin at index 0.

        Sampling a kernel on these gives the layout a circular convolution
        by FFT expects.
        """
        off = self.wrap(self.dx * np.arange(self.n))
        return tuple(np.meshgrid(*([off] * self.d), indexing="ij"))

    def wrap(self, x):
        """Map coordinates onto the periodic box ``[-R, R)``."""
        return np.mod(np.asarray(x) + self.R, 2 * self.R) - self.R

    def displacement(self, x0) -> tuple[np.ndarray, ...]:
        """Periodic displacement ``x - x0`` for every grid point."""
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (self.d,))
        return tuple(self.wrap(c - c0) for c, c0 in zip(self.coords, x0))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular frequencies for the real FFT layout (last axis halved)."""
        full = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        half = 2 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        axes = [full] * (self.d - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def xi_squared(self) -> np.ndarray:
        return sum(k * k for k in self.wavenumbers)

    def fft(self, u):
        return np.fft.rfftn(u, axes=tuple(range(-self.d, 0)))

    def ifft(self, uhat):
        return np.fft.irfftn(uhat, s=self.shape, axes=tuple(range(-self.d, 0)))

    def l2_norm(self, values) -> float:
        return float(np.sqrt(np.sum(np.square(values)) * self.cell_volume))

    def integral(self, values) -> float:
        return float(np.sum(values) * self.cell_volume)

    def nearest_index(self, x) -> tuple[int, ...]:
        x = np.broadcast_to(np.asarray(x, dtype=float), (self.d,))
        return tuple(int(round((xi + self.R) / self.dx)) % self.n for xi in x)

    def to_dict(self):
        return {"d": self.d, "R": self.R, "n": self.n}


@dataclass
class GridField:
    """Real grid function; ``values`` has shape ``spec.shape``."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.spec.shape}")

    def l2_norm(self) -> float:
        return self.spec.l2_norm(self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return self.spec.integral(self.values)
