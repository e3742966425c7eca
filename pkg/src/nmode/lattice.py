"""Box lattices of wells, their hopping matrix and its spectrum."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "LatticeSpec",
    "HoppingMatrix",
    "SpectrumMultiset",
    "hypercube",
    "build_index_set",
    "adjacency",
    "build_hopping_matrix",
    "spectrum_recursive",
    "spectrum_dense",
    "ground_state_vector",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Integer box ``J = {j : lo_m <= j_m <= hi_m}`` of well indices.

    ``bounds`` holds one ``(lo, hi)`` pair per axis.
    """

    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self):
        bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise DomainError("a lattice needs at least one axis")
        for m, (lo, hi) in enumerate(bounds):
            if lo > hi:
                raise DomainError(f"axis {m}: lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.bounds)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_hypercube(self) -> bool:
        return all(b == (0, 1) for b in self.bounds)

    @cached_property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(*(range(lo, hi + 1) for lo, hi in self.bounds)))

    @cached_property
    def position(self) -> dict[tuple[int, ...], int]:
        return {j: k for k, j in enumerate(self.indices)}

    @cached_property
    def neighbor_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-neighbour lists as ``(indptr, indices)`` int arrays."""
        pos = self.position
        indptr = [0]
        cols: list[int] = []
        for j in self.indices:
            row = []
            for m in range(self.dims):
                for step in (-1, 1):
                    nb = j[:m] + (j[m] + step,) + j[m + 1:]
                    k = pos.get(nb)
                    if k is not None:
                        row.append(k)
            cols.extend(sorted(row))
            indptr.append(len(cols))
        return np.asarray(indptr, dtype=np.intp), np.asarray(cols, dtype=np.intp)

    def neighbors(self, k: int) -> np.ndarray:
        indptr, cols = self.neighbor_csr
        return cols[indptr[k]:indptr[k + 1]]

    @cached_property
    def degrees(self) -> np.ndarray:
        indptr, _ = self.neighbor_csr
        return np.diff(indptr)

    def centers(self, spacing: float) -> np.ndarray:
        """Well centres ``x_j = j * spacing`` in index order, shape (N, d)."""
        return np.asarray(self.indices, dtype=float) * spacing


def hypercube(d: int) -> LatticeSpec:
    """The ``2**d`` well box ``{0, 1}^d``."""
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    return LatticeSpec(((0, 1),) * d)


def build_index_set(spec: LatticeSpec) -> list[tuple[int, ...]]:
    return list(spec.indices)


def adjacency(j: Sequence[int], l: Sequence[int]) -> bool:
    """True iff the multi-indices are at L1 distance exactly one."""
    if len(j) != len(l):
        raise DomainError(f"dimension mismatch: {len(j)} vs {len(l)}")
    return sum(abs(a - b) for a, b in zip(j, l)) == 1


@dataclass(frozen=True)
class HoppingMatrix:
    """Dense symmetric tight-binding matrix with diagonal ``lambda_D``."""

    lambda_D: float
    beta: float
    entries: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row-compressed nonzeros ``(indptr, indices, data)``."""
        rows, cols = np.nonzero(self.entries)
        indptr = np.searchsorted(rows, np.arange(self.size + 1)).astype(np.intp)
        return indptr, cols.astype(np.intp), self.entries[rows, cols].astype(float)


def build_hopping_matrix(spec: LatticeSpec, lambda_D: float = 0.0, beta: float = 1.0) -> HoppingMatrix:
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    n = spec.size
    T = np.zeros((n, n))
    T[np.diag_indices(n)] = lambda_D
    indptr, cols = spec.neighbor_csr
    for k in range(n):
        T[k, cols[indptr[k]:indptr[k + 1]]] = -beta
    T.setflags(write=False)
    return HoppingMatrix(float(lambda_D), float(beta), T)


@dataclass(frozen=True)
class SpectrumMultiset:
    """Distinct eigenvalues, ascending, with their multiplicities."""

    values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @property
    def size(self) -> int:
        return sum(self.multiplicities)

    def pairs(self) -> list[tuple[float, int]]:
        return list(zip(self.values, self.multiplicities))

    def matches(self, other: "SpectrumMultiset", atol: float = 1e-10) -> bool:
        if self.multiplicities != other.multiplicities:
            return False
        return bool(np.all(np.abs(np.subtract(self.values, other.values)) <= atol))


def spectrum_recursive(d: int, lambda_D: float = 0.0, beta: float = 1.0) -> SpectrumMultiset:
    """Spectrum of the ``{0,1}^d`` hopping matrix from the one-step recursion.

    Starting from the single value ``lambda_D``, each added axis maps every
    eigenvalue ``mu`` to ``mu - beta`` and ``mu + beta``; the multiplicity of
    a new value is the sum of the multiplicities of its parents.  Values are
    tracked as integer multiples of ``beta`` so clustering is exact.
    """
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    mult = {0: 1}
    for _ in range(d):
        nxt: dict[int, int] = {}
        for m, c in mult.items():
            for shift in (-1, 1):
                nxt[m + shift] = nxt.get(m + shift, 0) + c
        mult = nxt
    ms = sorted(mult)
    return SpectrumMultiset(tuple(lambda_D + beta * m for m in ms), tuple(mult[m] for m in ms))


def spectrum_dense(T: HoppingMatrix, cluster_tol: float | None = None,
                   return_vectors: bool = False):
    """Dense eigensolve of ``T`` with eigenvalues clustered into a multiset.

    Eigenvalues closer than ``cluster_tol`` (default ``1e-8 * beta``) to the
    running cluster are merged; the cluster value is the mean of its members.
    """
    tol = 1e-8 * T.beta if cluster_tol is None else cluster_tol
    if return_vectors:
        w, v = np.linalg.eigh(T.entries)
    else:
        w = np.linalg.eigvalsh(T.entries)
    groups: list[list[float]] = []
    for x in w:
        if groups and x - groups[-1][-1] <= tol:
            groups[-1].append(float(x))
        else:
            groups.append([float(x)])
    spec = SpectrumMultiset(tuple(float(np.mean(g)) for g in groups), tuple(len(g) for g in groups))
    if return_vectors:
        return spec, w, v
    return spec


def ground_state_vector(d: int) -> np.ndarray:
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    return np.full(2 ** d, 2.0 ** (-d / 2))
