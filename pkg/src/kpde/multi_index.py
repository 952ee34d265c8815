"""Multi-indices over the positions 1, 2, 3, ... and their total-degree truncations.

A multi-index is a finitely supported sequence of non-negative integers.
It labels one coefficient of a chaos expansion. Positions are 1-based to
match the usual notation e(1), e(2), ...
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

#: Largest truncation that :class:`TruncationSet` will materialize.
MAX_MATERIALIZED = 2_000_000

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True, order=False)
class MultiIndex:
    """Sparse multi-index, stored as sorted ``(position, count)`` pairs.

    Zero counts are never stored, so two indices are equal exactly when
    their sparse maps agree.
    """

    entries: tuple[tuple[int, int], ...] = ()
    order: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        cleaned = []
        last = 0
        for k, c in self.entries:
            k, c = int(k), int(c)
            if k < 1:
                raise ValueError(f"positions are 1-based, got {k}")
            if c < 0:
                raise ValueError(f"negative count {c} at position {k}")
            if k <= last:
                raise ValueError("positions must be strictly increasing")
            last = k
            if c:
                cleaned.append((k, c))
        object.__setattr__(self, "entries", tuple(cleaned))
        object.__setattr__(self, "order", sum(c for _, c in cleaned))

    @classmethod
    def zero(cls) -> "MultiIndex":
        return cls()

    @classmethod
    def unit(cls, k: int) -> "MultiIndex":
        """The unit index e(k)."""
        return cls(((k, 1),))

    @classmethod
    def from_dense(cls, values: Sequence[int]) -> "MultiIndex":
        """Build from a dense list ``[γ_1, γ_2, ...]``."""
        return cls(tuple((k + 1, int(c)) for k, c in enumerate(values) if c))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "MultiIndex":
        return cls(tuple(sorted((int(k), int(c)) for k, c in mapping.items())))

    def __getitem__(self, k: int) -> int:
        for pos, c in self.entries:
            if pos == k:
                return c
        return 0

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        merged = dict(self.entries)
        for k, c in other.entries:
            merged[k] = merged.get(k, 0) + c
        return MultiIndex.from_mapping(merged)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.entries)

    @property
    def max_position(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def dense(self, length: int | None = None) -> list[int]:
        """Dense list representation, the serialized form used in outputs."""
        length = self.max_position if length is None else length
        if self.max_position > length:
            raise ValueError(f"{self} does not fit in {length} positions")
        out = [0] * length
        for k, c in self.entries:
            out[k - 1] = c
        return out

    def grlex_key(self, length: int) -> tuple:
        # Within one degree, (2,0) precedes (1,1) precedes (0,2).
        return (self.order, tuple(-c for c in self.dense(length)))

    def __str__(self):
        if not self.entries:
            return "0"
        return "+".join(f"{c}e({k})" if c > 1 else f"e({k})" for k, c in self.entries)

    def __repr__(self):
        return f"MultiIndex({dict(self.entries)})"


def factorial(gamma: MultiIndex, exact: bool = True) -> int | float:
    """Return ``γ! = ∏ γ_k!``.

    With ``exact=False`` a float is returned, and :class:`OverflowError`
    is raised when it is not representable.
    """
    value = 1
    for _, c in gamma.entries:
        value *= math.factorial(c)
    if exact:
        return value
    return float(value)  # raises OverflowError past ~1.8e308


def log_weight_2N(gamma: MultiIndex) -> float:
    """``log (2ℕ)^γ = Σ γ_k log(2k)``."""
    return sum(c * math.log(2 * k) for k, c in gamma.entries)


def weight_2N(gamma: MultiIndex, p: float) -> float:
    """Kondratiev weight ``(2ℕ)^{-pγ} = ∏ (2k)^{-p γ_k}``.

    Evaluated in log space. For very large ``|γ|`` the result underflows
    to 0.0, which is the correct limit.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    return math.exp(-p * log_weight_2N(gamma))


def cardinality(max_order: int, max_dim: int) -> int:
    """Number of indices with ``|γ| <= P`` supported on ``1..K``."""
    return math.comb(max_dim + max_order, max_dim)


def _iter_grlex(max_order: int, max_dim: int) -> Iterator[MultiIndex]:
    for degree in range(max_order + 1):
        # compositions of `degree` into max_dim parts (stars and bars)
        shell = []
        for bars in itertools.combinations(range(degree + max_dim - 1), max_dim - 1):
            parts = []
            prev = -1
            for b in bars:
                parts.append(b - prev - 1)
                prev = b
            parts.append(degree + max_dim - 2 - prev)
            shell.append(parts)
        shell.sort(reverse=True)
        for parts in shell:
            yield MultiIndex.from_dense(parts)


class TruncationSet:
    """All multi-indices with ``|γ| <= max_order`` supported on ``1..max_dim``.

    Indices are materialized lazily, in graded lexicographic order, so that
    sizes and weight sums remain available for truncations far too large
    to list.
    """

    def __init__(self, max_order: int, max_dim: int):
        if max_order < 0:
            raise ValueError(f"max_order must be >= 0, got {max_order}")
        if max_dim < 1:
            raise ValueError(f"max_dim must be >= 1, got {max_dim}")
        size = cardinality(max_order, max_dim)
        if size > _INT64_MAX:
            raise OverflowError(
                f"truncation (P={max_order}, K={max_dim}) has {size} indices, "
                "which overflows a 64-bit count"
            )
        self.max_order = int(max_order)
        self.max_dim = int(max_dim)
        self.size = size

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"TruncationSet(P={self.max_order}, K={self.max_dim})"

    def __eq__(self, other):
        return (
            isinstance(other, TruncationSet)
            and other.max_order == self.max_order
            and other.max_dim == self.max_dim
        )

    def __hash__(self):
        return hash((self.max_order, self.max_dim))

    @cached_property
    def indices(self) -> tuple[MultiIndex, ...]:
        if self.size > MAX_MATERIALIZED:
            raise MemoryError(
                f"refusing to list {self.size} indices (limit {MAX_MATERIALIZED})"
            )
        return tuple(_iter_grlex(self.max_order, self.max_dim))

    @cached_property
    def position(self) -> dict[MultiIndex, int]:
        return {g: i for i, g in enumerate(self.indices)}

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, gamma: MultiIndex) -> bool:
        return gamma.order <= self.max_order and gamma.max_position <= self.max_dim

    def sort(self, gammas: Iterable[MultiIndex]) -> list[MultiIndex]:
        """Sort any indices of this set in its graded lexicographic order."""
        return sorted(gammas, key=lambda g: g.grlex_key(self.max_dim))

    def shell(self, degree: int) -> list[MultiIndex]:
        return [g for g in self.indices if g.order == degree]


def enumerate_indices(max_order: int, max_dim: int) -> TruncationSet:
    """Total-degree truncation of order ``P`` in ``K`` dimensions."""
    return TruncationSet(max_order, max_dim)


def weight_partial_sum(p: float, trunc: TruncationSet) -> float:
    """``Σ_{γ ∈ trunc} (2ℕ)^{-pγ}`` without listing the indices.

    The sum factorizes over positions, so it is the degree ``<= P`` part of
    ``∏_{k<=K} Σ_j ((2k)^{-p} x)^j`` evaluated at ``x = 1``. Computed by
    truncated polynomial multiplication, O(K P^2).
    """
    P, K = trunc.max_order, trunc.max_dim
    poly = np.zeros(P + 1)
    poly[0] = 1.0
    powers = np.arange(P + 1)
    for k in range(1, K + 1):
        factor = np.exp(-p * powers * math.log(2 * k))
        poly = np.convolve(poly, factor)[: P + 1]
    return float(math.fsum(poly))
