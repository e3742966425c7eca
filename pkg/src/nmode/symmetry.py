"""Lattice symmetry group and the fixed-point subspaces it induces.

A symmetry acts on site vectors by permuting sites.  Every subgroup ``H``
has a fixed-point subspace made of vectors that are constant on the
``H``-orbits, so fixed subspaces are described by partitions of the sites
into blocks.  Stationary states with a given symmetry are traced in the
block variables of that partition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DomainError
from .lattice import LatticeSpec, hypercube

__all__ = [
    "SymmetryClass",
    "symmetry_group",
    "apply_perm",
    "orbit_partition",
    "stabilizer",
    "fixed_partitions",
    "named_class",
    "NAMED_CLASSES",
    "canonical_image",
]

Partition = tuple[tuple[int, ...], ...]


def _normalize(blocks) -> Partition:
    return tuple(sorted(tuple(sorted(int(k) for k in b)) for b in blocks))


@dataclass(frozen=True)
class SymmetryClass:
    """A named partition of the sites; states in the class are block-constant."""

    label: str
    blocks: Partition

    def __post_init__(self):
        object.__setattr__(self, "blocks", _normalize(self.blocks))
        flat = sorted(k for b in self.blocks for k in b)
        if flat != list(range(len(flat))):
            raise DomainError(f"blocks of {self.label!r} do not partition 0..N-1")

    @property
    def n_sites(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @cached_property
    def expansion(self) -> np.ndarray:
        """0/1 matrix ``E`` (N x B) with ``q = E @ p``."""
        E = np.zeros((self.n_sites, self.n_blocks))
        for b, blk in enumerate(self.blocks):
            E[list(blk), b] = 1.0
        E.setflags(write=False)
        return E

    @cached_property
    def reps(self) -> np.ndarray:
        return np.array([b[0] for b in self.blocks], dtype=np.intp)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.blocks], dtype=float)

    def expand(self, p) -> np.ndarray:
        return self.expansion @ np.asarray(p, dtype=float)

    def reduce(self, q) -> np.ndarray:
        """Block averages of ``q`` (exact when ``q`` is in the class)."""
        return (self.expansion.T @ np.asarray(q, dtype=float)) / self.sizes

    def contains(self, q, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.max(np.abs(self.expand(self.reduce(q)) - q)) <= tol)

    def is_refinement_of(self, other: "SymmetryClass") -> bool:
        """True if every block of ``self`` lies inside a block of ``other``."""
        owner = {}
        for b, blk in enumerate(other.blocks):
            for k in blk:
                owner[k] = b
        return all(len({owner[k] for k in blk}) == 1 for blk in self.blocks)


def apply_perm(perm: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Image of the site vector ``v``: site ``k`` is moved to ``perm[k]``."""
    v = np.asarray(v)
    out = np.empty_like(v)
    out[perm] = v
    return out


@lru_cache(maxsize=32)
def _group_cached(bounds) -> np.ndarray:
    spec = LatticeSpec(bounds)
    shape = spec.shape
    pos = spec.position
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    idx = np.array(spec.indices)
    perms = []
    for axes in itertools.permutations(range(spec.dims)):
        if any(shape[a] != shape[m] for m, a in enumerate(axes)):
            continue
        for flips in itertools.product((False, True), repeat=spec.dims):
            # relative coordinates of axis axes[m] land on axis m, optionally reversed
            rel = idx[:, axes] - lo[list(axes)]
            length = np.array([shape[m] - 1 for m in range(spec.dims)])
            rel = np.where(flips, length - rel, rel)
            img = rel + lo
            perms.append([pos[tuple(int(x) for x in row)] for row in img])
    perms = np.array(perms, dtype=np.intp)
    # identity first, deterministic order otherwise
    ident = np.arange(spec.size)
    order = sorted(range(len(perms)), key=lambda i: (not np.array_equal(perms[i], ident), tuple(perms[i])))
    out = perms[order]
    out.setflags(write=False)
    return out


def symmetry_group(spec: LatticeSpec) -> np.ndarray:
    """All box symmetries (axis reflections and permutations of equal-length
    axes) as an array of site permutations, identity first.

    For ``{0,1}^d`` this is the hyperoctahedral group of order ``2**d * d!``.
    """
    return _group_cached(spec.bounds)


def orbit_partition(perms: np.ndarray, n: int | None = None) -> Partition:
    """Orbits of the group generated by ``perms`` on ``range(n)``."""
    perms = np.atleast_2d(perms)
    n = perms.shape[1] if n is None else n
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in perms:
        for k in range(n):
            a, b = find(k), find(int(p[k]))
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return _normalize(groups.values())


def _join(a: Partition, b: Partition, n: int) -> Partition:
    perms = []
    for part in (a, b):
        p = np.arange(n)
        for blk in part:
            for i, k in enumerate(blk):
                p[k] = blk[(i + 1) % len(blk)]
        perms.append(p)
    return orbit_partition(np.array(perms), n)


def stabilizer(perms: np.ndarray, v, tol: float = 1e-9) -> np.ndarray:
    """Elements of ``perms`` leaving the site vector ``v`` unchanged."""
    v = np.asarray(v, dtype=float)
    keep = [p for p in perms if np.max(np.abs(apply_perm(p, v) - v)) <= tol]
    return np.array(keep, dtype=np.intp)


def fixed_partitions(perms: np.ndarray) -> list[Partition]:
    """Orbit partitions of every subgroup of the group ``perms``.

    The orbit partition of a generated subgroup is the join of the orbit
    partitions of its generators, so closing the cyclic-subgroup partitions
    under joins enumerates all of them.
    """
    perms = np.atleast_2d(perms)
    n = perms.shape[1]
    found = {orbit_partition(p[None, :], n) for p in perms}
    frontier = set(found)
    while frontier:
        new = set()
        for a in frontier:
            for b in found:
                c = _join(a, b, n)
                if c not in found and c not in new:
                    new.add(c)
        found |= new
        frontier = new
    return sorted(found, key=lambda part: (-len(part), part))


# Block structures of the symmetry families studied on {0,1}^d, in
# lexicographic site order: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3 for d=2 and
# (0,0,0)=0 ... (1,1,1)=7 for d=3.
NAMED_CLASSES: dict[str, tuple[int, Partition, int]] = {
    # name: (dimension, blocks, anchor site that is largest in the canonical image)
    "mirror2d": (2, ((0, 1), (2, 3)), 0),
    "point2d": (2, ((0, 3), (1, 2)), 0),
    "partial2d": (2, ((0, 3), (1,), (2,)), 1),
    "F27": (3, ((0,), (1, 2, 4), (3, 5, 6), (7,)), 0),
    "F28": (3, ((0, 1, 6, 7), (4, 5), (2, 3)), 4),
}
_ALIASES = {"mirror": "mirror2d", "point": "point2d", "F23Ter": "partial2d", "F230Bis": "point2d",
            "partial3d-F27": "F27", "partial3d-F28": "F28"}


def named_class(name: str, spec: LatticeSpec) -> SymmetryClass:
    """Look up a symmetry class by name.

    ``full`` (all sites equal) and ``none`` (no constraint) exist for every
    lattice; the others are tied to ``{0,1}^2`` or ``{0,1}^3``.
    """
    n = spec.size
    if name == "full":
        return SymmetryClass("full", (tuple(range(n)),))
    if name == "none":
        return SymmetryClass("none", tuple((k,) for k in range(n)))
    key = _ALIASES.get(name, name)
    if key not in NAMED_CLASSES:
        raise DomainError(f"unknown symmetry class {name!r}")
    dim, blocks, _ = NAMED_CLASSES[key]
    if spec != hypercube(dim):
        raise DomainError(f"class {key!r} is defined on the {2 ** dim}-well hypercube only")
    return SymmetryClass(key, blocks)


def class_for_partition(blocks: Partition, n: int) -> SymmetryClass:
    """Wrap a partition, reusing a well-known label when one matches."""
    blocks = _normalize(blocks)
    if len(blocks) == 1:
        return SymmetryClass("full", blocks)
    if len(blocks) == n:
        return SymmetryClass("none", blocks)
    for key, (dim, named, _) in NAMED_CLASSES.items():
        if 2 ** dim == n and _normalize(named) == blocks:
            return SymmetryClass(key, blocks)
    # symmetry-conjugate copies of a named class get a "~" suffix
    for key, (dim, named, _) in NAMED_CLASSES.items():
        if 2 ** dim != n:
            continue
        for p in symmetry_group(hypercube(dim)):
            if _normalize([[int(p[k]) for k in b] for b in named]) == blocks:
                return SymmetryClass(key + "~", blocks)
    label = "orbits:" + "|".join(",".join(str(k) for k in b) for b in blocks)
    return SymmetryClass(label, blocks)


def canonical_image(q, spec: LatticeSpec, cls: SymmetryClass, anchor: int | None = None):
    """Symmetry image of ``q`` that lies in ``cls`` and maximises ``q[anchor]``.

    Returns ``(image, perm)``.  Used to present a state in a fixed labelling
    (for instance the orientation tabulated for a family).
    """
    q = np.asarray(q, dtype=float)
    if anchor is None:
        anchor = NAMED_CLASSES.get(cls.label, (0, (), 0))[2]
    best = None
    for p in symmetry_group(spec):
        img = apply_perm(p, q)
        if not cls.contains(img, tol=1e-7):
            continue
        if best is None or img[anchor] > best[0][anchor] + 1e-12:
            best = (img, p)
    if best is None:
        raise DomainError(f"no symmetry image of the state lies in class {cls.label!r}")
    return best
