"""Pseudo-arclength continuation of equal-phase stationary states in ``eta``.

Branches are traced in the block variables ``(p, Omega, eta)`` of a
:class:`~nmode.symmetry.SymmetryClass`; states on a branch are constant on
the blocks.  Bifurcations are found from the determinant of the full
``(N+1) x (N+1)`` Jacobian of the equal-phase system, which also sees the
symmetry-breaking directions that the reduced system hides.  Switching at a
branch point picks kernel directions whose isotropy subgroup has a
one-dimensional fixed space inside the kernel and continues them in that
subgroup's block variables.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, DomainError, StepUnderflowError
from .lattice import LatticeSpec
from .stationary import (NewtonConfig, StationaryParams, jacobian_positive, reduced_jacobian,
                         reduced_residual, solve_newton, symmetric_branch_points, symmetric_solution)
from .symmetry import (SymmetryClass, apply_perm, canonical_image, class_for_partition, fixed_partitions,
                       named_class, orbit_partition, stabilizer, symmetry_group)

__all__ = [
    "StepControl",
    "BranchPoint",
    "Branch",
    "BifurcationEvent",
    "Seed",
    "Diagram",
    "continue_branch",
    "detect_events",
    "locate_fold",
    "branch_switch",
    "sweep_ground_diagram",
    "symmetric_branch",
    "family_branch",
    "family_state",
    "FAMILIES",
]

log = logging.getLogger(__name__)

DIP_THRESHOLD = 1e-8
ETA_RESOLUTION = 1e-8


@dataclass(frozen=True)
class StepControl:
    initial: float = 1e-2
    min: float = 1e-8
    max: float = 0.1
    tol: float = 1e-12
    max_points: int = 20000


@dataclass
class BranchPoint:
    eta: float
    q: np.ndarray
    Omega: float
    det_sign: int
    arclength: float
    det: float = 0.0
    det_scale: float = 1.0
    x: np.ndarray = field(default=None, repr=False)
    tangent: np.ndarray = field(default=None, repr=False)


@dataclass
class Branch:
    points: list[BranchPoint]
    symmetry: SymmetryClass
    origin: str
    spec: LatticeSpec = field(repr=False)
    sigma: int = 1
    termination: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def etas(self) -> np.ndarray:
        return np.array([p.eta for p in self.points])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.Omega for p in self.points])

    @property
    def qs(self) -> np.ndarray:
        return np.array([p.q for p in self.points])


@dataclass
class BifurcationEvent:
    kind: str  # "fold" or "branch_point"
    eta_star: float
    q_star: np.ndarray
    Omega_star: float
    null_direction: np.ndarray | None = field(default=None, repr=False)
    segment: int = -1
    even: bool = False
    x_star: np.ndarray = field(default=None, repr=False)

    @property
    def state_star(self):
        return self.q_star, self.Omega_star


@dataclass
class Seed:
    q: np.ndarray
    Omega: float
    eta: float
    symmetry: SymmetryClass
    direction: np.ndarray = field(repr=False)
    origin: str = ""


class _System:
    """Equal-phase equations in the block variables of one symmetry class."""

    def __init__(self, spec: LatticeSpec, cls: SymmetryClass, sigma: int):
        self.spec, self.cls, self.sigma = spec, cls, int(sigma)
        self.B = cls.n_blocks

    def pack(self, q, Omega, eta) -> np.ndarray:
        return np.concatenate([self.cls.reduce(q), [Omega, eta]])

    def q(self, x) -> np.ndarray:
        return self.cls.expand(x[:self.B])

    def G(self, x) -> np.ndarray:
        return reduced_residual(x[:self.B], x[self.B], x[self.B + 1], self.sigma, self.spec, self.cls)

    def DG(self, x) -> np.ndarray:
        return reduced_jacobian(x[:self.B], x[self.B], x[self.B + 1], self.sigma, self.spec, self.cls)

    def correct(self, x, row, rhs, tol, max_iter=15):
        """Newton on ``G(x) = 0, row . x = rhs``; returns ``(x, iterations)`` or ``None``."""
        x = np.array(x, dtype=float)
        for it in range(max_iter + 1):
            if np.any(x[:self.B] <= 0):
                return None
            g = self.G(x)
            F = np.append(g, row @ x - rhs)
            if np.max(np.abs(F)) <= tol:
                return x, it
            if it == max_iter:
                return None
            A = np.vstack([self.DG(x), row])
            try:
                dx = np.linalg.solve(A, -F)
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(dx)):
                return None
            x = x + dx
        return None

    def tangent(self, x, ref) -> np.ndarray:
        A = np.vstack([self.DG(x), ref])
        rhs = np.zeros(self.B + 2)
        rhs[-1] = 1.0
        t = np.linalg.solve(A, rhs)
        return t / np.linalg.norm(t)

    def null_tangent(self, x) -> np.ndarray:
        _, _, vt = np.linalg.svd(self.DG(x))
        return vt[-1]

    def full_det(self, x) -> tuple[float, float]:
        J = jacobian_positive(self.q(x), StationaryParams(self.sigma, x[self.B + 1]), self.spec)
        scale = float(np.prod(np.linalg.norm(J, axis=1)))
        return float(np.linalg.det(J)), scale

    def make_point(self, x, t, s) -> BranchPoint:
        det, scale = self.full_det(x)
        return BranchPoint(eta=float(x[-1]), q=self.q(x), Omega=float(x[self.B]),
                           det_sign=int(np.sign(det)), arclength=float(s), det=det, det_scale=scale,
                           x=x.copy(), tangent=t.copy())

    def point_at(self, base: BranchPoint, s: float, tol: float):
        """Point on the branch whose projection on ``base.tangent`` is ``s`` past ``base``."""
        t = base.tangent
        res = self.correct(base.x + s * t, t, t @ base.x + s, tol)
        if res is None:
            raise ConvergenceError(f"corrector failed at offset {s:g} from eta={base.eta:.6g}")
        x = res[0]
        return x, self.tangent(x, t)


def _full_class(spec: LatticeSpec) -> SymmetryClass:
    return SymmetryClass("none", tuple((k,) for k in range(spec.size)))


def continue_branch(seed, sigma: int, spec: LatticeSpec, eta_range: tuple[float, float],
                    step: StepControl = StepControl(), symmetry: SymmetryClass | None = None,
                    direction=-1.0, origin: str = "seed") -> Branch:
    """Trace one branch from ``seed = (q, Omega, eta)`` until it leaves ``eta_range``.

    ``direction`` orients the first step: a scalar picks the sign of the
    initial ``d eta``, an array (in the block variables, length ``B+2``) is a
    reference vector the first tangent must point along.  Tracing stops at
    the range boundary (the last point is placed exactly on it), when an
    occupation drops below ``1e-6``, on step underflow, or after
    ``step.max_points`` points.
    """
    cls = symmetry if symmetry is not None else _full_class(spec)
    sys_ = _System(spec, cls, sigma)
    q0, Om0, eta0 = seed
    lo, hi = sorted(eta_range)
    nres = solve_newton(q0, Om0, StationaryParams(sigma, eta0), spec,
                        NewtonConfig(tol=step.tol, cond_max=np.inf), symmetry=cls)
    x = sys_.pack(nres.q, nres.Omega, eta0)
    t = sys_.null_tangent(x)
    if np.ndim(direction) == 0:
        if abs(t[-1]) < 1e-12:
            raise DomainError("seed sits on a fold; pass a direction vector instead of a sign")
        t = t * np.sign(t[-1] * direction)
    else:
        t = t * (1.0 if t @ np.asarray(direction) >= 0 else -1.0)
    pts = [sys_.make_point(x, t, 0.0)]
    h = step.initial
    s = 0.0
    termination = "max_points"
    while len(pts) < step.max_points:
        base = pts[-1]
        res = sys_.correct(base.x + h * base.tangent, base.tangent, base.tangent @ base.x + h, step.tol)
        ok = res is not None
        if ok:
            xn, iters = res
            tn = sys_.tangent(xn, base.tangent)
            if tn @ base.tangent < 0.9 and h > 10 * step.min:
                ok = False
        if not ok:
            h *= 0.5
            if h < step.min:
                if len(pts) == 1:
                    raise StepUnderflowError(f"no progress from seed at eta={eta0}")
                termination = "step_underflow"
                break
            continue
        s += h
        if not lo <= xn[-1] <= hi:
            bound = hi if xn[-1] > hi else lo
            row = np.zeros_like(xn)
            row[-1] = 1.0
            guess = base.x + (xn - base.x) * (bound - base.x[-1]) / (xn[-1] - base.x[-1])
            res_b = sys_.correct(guess, row, bound, step.tol)
            if res_b is not None:
                xb = res_b[0]
                tb = sys_.tangent(xb, base.tangent)
                pts.append(sys_.make_point(xb, tb, pts[-1].arclength + np.linalg.norm(xb - base.x)))
            termination = "range"
            break
        pts.append(sys_.make_point(xn, tn, s))
        if np.min(pts[-1].q) < 1e-6:
            termination = "q_boundary"
            break
        if iters <= 3:
            h = min(1.5 * h, step.max)
        elif iters >= 7:
            h = max(h / 1.5, step.min)
    return Branch(pts, cls, origin, spec, int(sigma), termination)


def _refine_sign_change(sys_: _System, base: BranchPoint, s_hi: float, value, tol: float):
    """Bisect ``[0, s_hi]`` (offsets from ``base``) for a sign change of ``value(x, t)``."""
    v_lo = value(base.x, base.tangent)
    lo, hi = 0.0, s_hi
    x_lo = base.x
    x_hi = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        xm, tm = sys_.point_at(base, mid, tol)
        vm = value(xm, tm)
        if np.sign(vm) == np.sign(v_lo):
            lo, x_lo, v_lo = mid, xm, vm
        else:
            hi, x_hi = mid, xm
        if x_hi is not None and abs(x_hi[-1] - x_lo[-1]) < ETA_RESOLUTION and hi - lo < 1e-6:
            break
        if hi - lo < 1e-13:
            break
    xm, _ = sys_.point_at(base, 0.5 * (lo + hi), tol)
    return xm


def _null_space(sys_: _System, x, rel: float = 1e-5) -> np.ndarray:
    J = jacobian_positive(sys_.q(x), StationaryParams(sys_.sigma, x[-1]), sys_.spec)
    _, sv, vt = np.linalg.svd(J)
    k = max(1, int(np.sum(sv <= rel * sv[0])))
    return vt[-k:].T.copy()


def _event(sys_: _System, kind: str, x, segment: int, even: bool = False) -> BifurcationEvent:
    null = _null_space(sys_, x) if kind == "branch_point" else None
    return BifurcationEvent(kind, float(x[-1]), sys_.q(x), float(x[sys_.B]), null, segment, even, x.copy())


def locate_fold(branch: Branch, bracket: int) -> BifurcationEvent:
    """Refine the turning point between ``points[bracket]`` and ``points[bracket + 1]``."""
    sys_ = _System(branch.spec, branch.symmetry, branch.sigma)
    a, b = branch.points[bracket], branch.points[bracket + 1]
    if np.sign(a.tangent[-1]) == np.sign(b.tangent[-1]):
        raise DomainError(f"no reversal of d eta between points {bracket} and {bracket + 1}")
    s_hi = a.tangent @ (b.x - a.x)
    x = _refine_sign_change(sys_, a, s_hi, lambda x, t: t[-1], 1e-12)
    return _event(sys_, "fold", x, bracket)


def _det_value(sys_):
    def value(x, t):
        d, sc = sys_.full_det(x)
        return d / sc
    return value


def detect_events(branch: Branch, dip_threshold: float = DIP_THRESHOLD) -> list[BifurcationEvent]:
    """Folds and branch points along a traced branch, in arclength order.

    A sign change of the full Jacobian determinant between neighbouring
    points is a fold when ``d eta / ds`` also changes sign there and a branch
    point otherwise.  Even-multiplicity zeros do not change sign; they are
    caught as local minima of the scaled ``|det|`` whose refined value falls
    below ``dip_threshold``.
    """
    pts = branch.points
    if len(pts) < 2:
        return []
    sys_ = _System(branch.spec, branch.symmetry, branch.sigma)
    tol = 1e-12
    events: list[BifurcationEvent] = []
    rel = np.array([abs(p.det) / p.det_scale for p in pts])
    signs = [p.det_sign for p in pts]
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]:
            if np.sign(a.tangent[-1]) != np.sign(b.tangent[-1]):
                events.append(locate_fold(branch, i))
            else:
                x = _refine_sign_change(sys_, a, a.tangent @ (b.x - a.x), _det_value(sys_), tol)
                events.append(_event(sys_, "branch_point", x, i))
    for i in range(1, len(pts) - 1):
        if not (rel[i] < rel[i - 1] and rel[i] < rel[i + 1]):
            continue
        if signs[i - 1] != signs[i] or signs[i] != signs[i + 1]:
            continue
        base = pts[i - 1]
        s_end = base.tangent @ (pts[i + 1].x - base.x)

        def mag(s):
            try:
                x, _ = sys_.point_at(base, s, tol)
            except ConvergenceError:
                return np.inf
            d, sc = sys_.full_det(x)
            return abs(d) / sc

        opt = minimize_scalar(mag, bounds=(0.0, s_end), method="bounded",
                              options={"xatol": 1e-10, "maxiter": 200})
        if opt.fun < dip_threshold:
            x, t = sys_.point_at(base, opt.x, tol)
            seg = i - 1 if opt.x < base.tangent @ (pts[i].x - base.x) else i
            kind = "fold" if abs(t[-1]) < 1e-6 else "branch_point"
            events.append(_event(sys_, kind, x, seg, even=True))
    events.sort(key=lambda e: (e.segment, e.eta_star))
    return events


def _orthonormal_fix(cls: SymmetryClass) -> np.ndarray:
    n = cls.n_sites
    Q = np.zeros((n + 1, cls.n_blocks + 1))
    Q[:n, :cls.n_blocks] = cls.expansion / np.sqrt(cls.sizes)
    Q[n, cls.n_blocks] = 1.0
    return Q


def _same_up_to(perms, u, v, tol=1e-7) -> bool:
    return any(np.max(np.abs(apply_perm(p, u) - v)) <= tol for p in perms)


def branch_switch(event: BifurcationEvent, branch: Branch, perturbation: float = 1e-3,
                  tol: float = 1e-12, modulo_symmetry: bool = True) -> list[Seed]:
    """Seeds on the branches that emanate from a branch point.

    Candidate directions are kernel vectors spanning a one-dimensional
    intersection with the fixed space of some subgroup of the parent's
    isotropy group.  Directions related by that isotropy group describe the
    same branch, so one representative per orbit is kept; with
    ``modulo_symmetry=False`` both half-branches ``+v`` and ``-v`` of every
    kernel line are returned even when they are images of each other.
    The number of branches meeting at the point is ``1 + len(seeds)`` in
    the default mode.  Each seed solves
    the equations together with ``w . (x - x*) = perturbation``, with
    ``eta`` free, so sub- and supercritical branches are both reached.
    """
    if event.kind != "branch_point" or event.null_direction is None:
        raise DomainError("branch switching needs a branch point with a computed kernel")
    spec, sigma = branch.spec, branch.sigma
    n = spec.size
    K = event.null_direction
    group = symmetry_group(spec)
    iso = stabilizer(group, event.q_star, tol=1e-8)
    parent_fix = _orthonormal_fix(branch.symmetry)
    lines: list[np.ndarray] = []
    for part in fixed_partitions(iso):
        Q = _orthonormal_fix(SymmetryClass("tmp", part))
        M = K - Q @ (Q.T @ K)
        _, sv, vt = np.linalg.svd(M)
        sv = np.concatenate([sv, np.zeros(K.shape[1] - sv.size)])
        null = vt[sv <= 1e-6 * max(1.0, np.max(np.abs(K)))]
        if null.shape[0] != 1:
            continue
        v = K @ null[0]
        vq = v[:n]
        if np.linalg.norm(vq) < 1e-8:
            continue
        if np.linalg.norm(v - parent_fix @ (parent_fix.T @ v)) < 1e-6:
            continue  # direction along the parent branch's own fixed space
        v = v / np.linalg.norm(vq)
        vq = v[:n]
        if any(_same_up_to(iso, vq, w[:n]) or _same_up_to(iso, vq, -w[:n]) for w in lines):
            continue
        lines.append(v)
    seeds: list[Seed] = []
    for v in lines:
        dirs = [v]
        if not modulo_symmetry or not _same_up_to(iso, v[:n], -v[:n]):
            dirs.append(-v)
        for u in dirs:
            sub = stabilizer(iso, u[:n], tol=1e-8)
            cls = class_for_partition(orbit_partition(sub, n), n)
            sys_ = _System(spec, cls, sigma)
            x_star = sys_.pack(event.q_star, event.Omega_star, event.eta_star)
            w = np.concatenate([cls.reduce(u[:n]), [u[n], 0.0]])
            w /= np.linalg.norm(w)
            res = sys_.correct(x_star + perturbation * w, w, w @ x_star + perturbation, tol, max_iter=40)
            if res is None:
                log.debug("branch switch along %s did not converge", cls.label)
                continue
            x = res[0]
            origin = f"{branch.symmetry.label}@eta={event.eta_star:.6f}"
            seeds.append(Seed(sys_.q(x), float(x[sys_.B]), float(x[-1]), cls, x - x_star, origin))
    if not seeds:
        raise ConvergenceError(f"no emanating branch found at eta={event.eta_star:.6g}")
    return seeds


def symmetric_branch(spec: LatticeSpec, sigma: int, eta_range, step: StepControl = StepControl()) -> Branch:
    """Uniform-state branch traced downward from the top of ``eta_range``."""
    if not spec.is_hypercube:
        raise DomainError("the uniform state is stationary on the {0,1}^d box only")
    lo, hi = sorted(eta_range)
    q, Om = symmetric_solution(spec.dims, sigma, hi)
    return continue_branch((q, Om, hi), sigma, spec, (lo, hi), step,
                           symmetry=named_class("full", spec), direction=-1.0, origin="symmetric")


def _on_branch(seed_q, seed_Omega, seed_eta, branch: Branch, group, tol=1e-6) -> bool:
    cls = branch.symmetry
    sys_ = _System(branch.spec, cls, branch.sigma)
    X = np.array([p.x for p in branch.points])
    for g in group:
        img = apply_perm(g, seed_q)
        if not cls.contains(img, tol=1e-7):
            continue
        xs = sys_.pack(img, seed_Omega, seed_eta)
        k = int(np.argmin(np.linalg.norm(X - xs, axis=1)))
        if np.linalg.norm(X[k] - xs) > 0.5:
            continue
        for j in {max(k - 1, 0), k}:
            t = branch.points[j].tangent
            res = sys_.correct(X[j] + (t @ (xs - X[j])) * t, t, t @ xs, 1e-12)
            if res is not None and np.max(np.abs(res[0] - xs)) < tol:
                return True
    return False


@dataclass
class Diagram:
    spec: LatticeSpec
    sigma: int
    eta_range: tuple[float, float]
    branches: list[Branch]
    events: list[tuple[int, BifurcationEvent]]
    branch_counts: dict[int, int] = field(default_factory=dict)

    def unique_events(self, tol: float = 1e-5) -> list[tuple[int, BifurcationEvent]]:
        """Events with coincident location and symmetry-equivalent state merged."""
        group = symmetry_group(self.spec)
        out: list[tuple[int, BifurcationEvent]] = []
        for bid, ev in self.events:
            dup = False
            for _, other in out:
                if other.kind == ev.kind and abs(other.eta_star - ev.eta_star) < tol \
                        and _same_up_to(group, ev.q_star, other.q_star, tol=1e-4):
                    dup = True
                    break
            if not dup:
                out.append((bid, ev))
        return out

    def __iter__(self):
        return iter(self.branches)


def sweep_ground_diagram(spec: LatticeSpec, sigma: int, eta_range, step: StepControl = StepControl(),
                         max_branches: int = 64, perturbation: float = 1e-3, threads: int = 1) -> Diagram:
    """Every branch reachable from the uniform state by repeated branch switching.

    Branches are deduplicated modulo the lattice symmetry group: a seed that
    lies on the image of an already traced branch is dropped.  ``threads``
    traces the seeds of one branch point concurrently; results are merged in
    a fixed order so the diagram does not depend on scheduling.
    """
    lo, hi = sorted(eta_range)
    group = symmetry_group(spec)
    sym = symmetric_branch(spec, sigma, (lo, hi), step)
    branches = [sym]
    events: list[tuple[int, BifurcationEvent]] = []
    counts: dict[int, int] = {}
    pending = [0]
    while pending:
        bid = pending.pop(0)
        br = branches[bid]
        for ev in detect_events(br):
            events.append((bid, ev))
            if ev.kind != "branch_point":
                continue
            try:
                seeds = branch_switch(ev, br, perturbation)
            except ConvergenceError as exc:
                log.warning("branch switch failed: %s", exc)
                continue
            counts[len(events) - 1] = 1 + len(seeds)
            todo = [sd for sd in seeds if lo <= sd.eta <= hi
                    and not any(_on_branch(sd.q, sd.Omega, sd.eta, b, group) for b in branches)]
            args = [(sd, spec, sigma, (lo, hi), step) for sd in todo]
            if threads > 1 and len(args) > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    traced = list(pool.map(lambda a: _trace_seed(*a), args))
            else:
                traced = [_trace_seed(*a) for a in args]
            for sd, nb in zip(todo, traced):
                if len(branches) >= max_branches:
                    break
                if any(_on_branch(sd.q, sd.Omega, sd.eta, b, group) for b in branches):
                    continue
                branches.append(nb)
                pending.append(len(branches) - 1)
            if len(branches) >= max_branches:
                log.warning("max_branches=%d reached; diagram truncated", max_branches)
                pending.clear()
                break
    return Diagram(spec, int(sigma), (lo, hi), branches, events, counts)


def _trace_seed(sd: Seed, spec, sigma, eta_range, step) -> Branch:
    return continue_branch((sd.q, sd.Omega, sd.eta), sigma, spec, eta_range, step,
                           symmetry=sd.symmetry, direction=sd.direction, origin=sd.origin)


# Named families: (dimension, symmetry class, anchor site)
FAMILIES = {
    "asym": (1, "none"),
    "mirror": (2, "mirror2d"),
    "point": (2, "point2d"),
    "F23Ter": (2, "partial2d"),
    "F27": (3, "F27"),
    "F28": (3, "F28"),
}


def family_branch(d: int, sigma: int, family: str, eta_min: float,
                  step: StepControl = StepControl()) -> Branch:
    """Trace a named symmetry family from its birth on the uniform branch.

    The family is born at the first uniform-state branch point whose kernel
    meets the family's fixed space in a single line.
    """
    if family not in FAMILIES or FAMILIES[family][0] != d:
        raise DomainError(f"family {family!r} is not defined in dimension {d}")
    from .lattice import hypercube
    spec = hypercube(d)
    cls = named_class(FAMILIES[family][1], spec)
    full = _full_class(spec)
    Q = _orthonormal_fix(cls)
    for eta_b, _ in symmetric_branch_points(d, sigma):
        q, Om = symmetric_solution(d, sigma, eta_b)
        sys_full = _System(spec, full, sigma)
        K = _null_space(sys_full, sys_full.pack(q, Om, eta_b), rel=1e-8)
        M = K - Q @ (Q.T @ K)
        _, sv, vt = np.linalg.svd(M)
        sv = np.concatenate([sv, np.zeros(K.shape[1] - sv.size)])
        null = vt[sv <= 1e-8]
        if null.shape[0] != 1:
            continue
        v = K @ null[0]
        ev = BifurcationEvent("branch_point", eta_b, q, Om, v[:, None])
        sys_ = _System(spec, cls, sigma)
        x_star = sys_.pack(q, Om, eta_b)
        w = np.concatenate([cls.reduce(v[:-1]), [v[-1], 0.0]])
        w /= np.linalg.norm(w)
        eps = 1e-3
        res = sys_.correct(x_star + eps * w, w, w @ x_star + eps, step.tol, max_iter=40)
        if res is None:
            raise ConvergenceError(f"could not leave the uniform branch at eta={eta_b}")
        x = res[0]
        br = continue_branch((sys_.q(x), x[sys_.B], x[-1]), sigma, spec, (eta_min, 0.0), step,
                             symmetry=cls, direction=x - x_star,
                             origin=f"full@eta={ev.eta_star:.6f}")
        return br
    raise DomainError(f"family {family!r} does not bifurcate from the uniform state")


def family_state(d: int, sigma: int, family: str, eta: float, part: str = "b",
                 branch: Branch | None = None, step: StepControl = StepControl()):
    """State of a named family at ``eta``, in the family's canonical orientation.

    ``part`` selects the sub-branch: ``"a"`` lies between the birth point and
    the first fold, ``"b"`` beyond the fold (families without a fold have
    only ``"a"``; ``"b"`` then falls back to it).  Returns ``(q, Omega)``.
    """
    from .lattice import hypercube
    spec = hypercube(d)
    if branch is None:
        branch = family_branch(d, sigma, family, min(eta - 1.0, -1.0), step)
    etas = branch.etas
    tang = np.array([p.tangent[-1] for p in branch.points])
    flips = np.flatnonzero(np.sign(tang[:-1]) != np.sign(tang[1:]))
    if part == "a":
        idx = range(0, (flips[0] + 1) if flips.size else len(etas))
    elif part == "b":
        idx = range(flips[0] + 1, len(etas)) if flips.size else range(len(etas))
    else:
        raise DomainError(f"part must be 'a' or 'b', got {part!r}")
    idx = list(idx)
    cand = None
    for i, j in zip(idx[:-1], idx[1:]):
        if (etas[i] - eta) * (etas[j] - eta) <= 0:
            cand = (i, j)
            break
    if cand is None:
        raise DomainError(f"eta={eta} is not on part {part!r} of family {family!r}")
    i, j = cand
    a, b = branch.points[i], branch.points[j]
    w = 0.0 if b.eta == a.eta else (eta - a.eta) / (b.eta - a.eta)
    q0 = (1 - w) * a.q + w * b.q
    Om0 = (1 - w) * a.Omega + w * b.Omega
    res = solve_newton(q0, Om0, StationaryParams(sigma, eta), spec, NewtonConfig(cond_max=np.inf),
                       symmetry=branch.symmetry)
    q = res.q
    if family in ("F23Ter", "F27", "F28"):
        q, _ = canonical_image(q, spec, named_class(FAMILIES[family][1], spec))
    return q, res.Omega
