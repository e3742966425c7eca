"""Stationary states of the N-mode system.

Stationary states ``d_j = sqrt(q_j) exp(i theta_j)`` solve, in reduced units
(``Omega = (hbar*omega - lambda_D)/beta``, ``eta = c*eps/beta``),

    sum_{l~j} sqrt(q_j q_l) sin(theta_l - theta_j) = 0
    sum_{l~j} sqrt(q_l/q_j) cos(theta_l - theta_j) - eta q_j^sigma = -Omega

together with ``sum_j q_j = 1``.  Continuations of the linear ground state
keep every phase equal and every ``q_j > 0``; on that chart the system is

    f_j = -sum_{l~j} sqrt(q_l/q_j) + eta q_j^sigma - Omega,   f_{N+1} = sum q - 1,

whose Jacobian with respect to ``(q, Omega)`` vanishes at bifurcations.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .errors import ConvergenceError, DomainError, SingularJacobianError
from .lattice import LatticeSpec
from .symmetry import SymmetryClass

__all__ = [
    "ModeState",
    "StationaryParams",
    "NewtonConfig",
    "NewtonResult",
    "PitchforkRoot",
    "residual_full",
    "residual_positive",
    "jacobian_positive",
    "reduced_residual",
    "reduced_jacobian",
    "symmetric_solution",
    "symmetric_branch_points",
    "closed_form_1d",
    "closed_form_2d_mirror",
    "closed_form_2d_point",
    "scalar_pitchfork_residual",
    "scalar_pitchfork_roots",
    "solve_newton",
]

NORM_TOL = 1e-12


@dataclass(frozen=True)
class ModeState:
    """Occupations ``q`` on the simplex and phases ``theta`` in ``[0, 2 pi)``."""

    q: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        theta = np.mod(np.array(self.theta, dtype=float), 2 * np.pi)
        if q.ndim != 1 or q.shape != theta.shape:
            raise DomainError("q and theta must be 1-d arrays of equal length")
        if np.any(q < 0):
            raise DomainError(f"negative occupation at site {int(np.argmin(q))}")
        if abs(q.sum() - 1.0) > NORM_TOL:
            raise DomainError(f"occupations sum to {q.sum():.15g}, expected 1")
        q.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def normalized(cls, q, theta=None) -> "ModeState":
        q = np.asarray(q, dtype=float)
        theta = np.zeros_like(q) if theta is None else theta
        return cls(q / q.sum(), theta)

    @classmethod
    def from_coefficients(cls, d) -> "ModeState":
        d = np.asarray(d, dtype=complex)
        return cls(np.abs(d) ** 2, np.angle(d))

    @property
    def coefficients(self) -> np.ndarray:
        return np.sqrt(self.q) * np.exp(1j * self.theta)


@dataclass(frozen=True)
class StationaryParams:
    sigma: int = 1
    eta: float = 0.0
    Omega: float = 0.0

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise DomainError(f"sigma must be a positive integer, got {self.sigma}")
        object.__setattr__(self, "sigma", int(self.sigma))


def _positive(q, spec: LatticeSpec) -> np.ndarray:
    q = np.ascontiguousarray(q, dtype=float)
    if q.shape != (spec.size,):
        raise DomainError(f"expected {spec.size} occupations, got shape {q.shape}")
    bad = np.flatnonzero(~(q > 0))
    if bad.size:
        k = int(bad[0])
        raise DomainError(f"zero amplitude at site {spec.indices[k]} (q={q[k]!r}); "
                          "the positive chart needs q_j > 0")
    return q


def residual_full(state: ModeState, params: StationaryParams, spec: LatticeSpec) -> np.ndarray:
    """Both stationary equations with free phases, ``2N`` components.

    The first ``N`` entries are the phase (sine) equations, the last ``N`` are
    ``sum sqrt(q_l/q_j) cos(theta_l - theta_j) - eta q_j^sigma + Omega``.
    """
    q = _positive(state.q, spec)
    th = state.theta
    indptr, cols = spec.neighbor_csr
    rows = np.repeat(np.arange(spec.size), np.diff(indptr))
    dth = th[cols] - th[rows]
    sin_part = np.bincount(rows, np.sqrt(q[rows] * q[cols]) * np.sin(dth), minlength=spec.size)
    cos_part = np.bincount(rows, np.sqrt(q[cols] / q[rows]) * np.cos(dth), minlength=spec.size)
    return np.concatenate([sin_part, cos_part - params.eta * q ** params.sigma + params.Omega])


def residual_positive(q, params: StationaryParams, spec: LatticeSpec) -> np.ndarray:
    """Equal-phase system ``(f_1..f_N, sum q - 1)``."""
    q = _positive(q, spec)
    indptr, cols = spec.neighbor_csr
    f = kernels.residual_positive(q, indptr, cols, float(params.eta), float(params.Omega), params.sigma)
    return np.append(f, q.sum() - 1.0)


def jacobian_positive(q, params: StationaryParams, spec: LatticeSpec) -> np.ndarray:
    """Analytic ``d(f_1..f_{N+1}) / d(q_1..q_N, Omega)``."""
    q = _positive(q, spec)
    indptr, cols = spec.neighbor_csr
    return kernels.jacobian_positive(q, indptr, cols, float(params.eta), params.sigma)


def reduced_residual(p, Omega: float, eta: float, sigma: int, spec: LatticeSpec,
                     cls: SymmetryClass) -> np.ndarray:
    """Equal-phase system restricted to states that are constant on the blocks of ``cls``."""
    q = _positive(cls.expand(p), spec)
    indptr, cols = spec.neighbor_csr
    f = kernels.residual_positive(q, indptr, cols, float(eta), float(Omega), int(sigma))
    return np.append(f[cls.reps], cls.sizes @ np.asarray(p, dtype=float) - 1.0)


def reduced_jacobian(p, Omega: float, eta: float, sigma: int, spec: LatticeSpec,
                     cls: SymmetryClass) -> np.ndarray:
    """``(B+1) x (B+2)`` Jacobian of :func:`reduced_residual` in ``(p, Omega, eta)``."""
    q = _positive(cls.expand(p), spec)
    indptr, cols = spec.neighbor_csr
    J = kernels.jacobian_positive(q, indptr, cols, float(eta), int(sigma))
    B = cls.n_blocks
    out = np.zeros((B + 1, B + 2))
    out[:B, :B] = J[cls.reps, :-1] @ cls.expansion
    out[:B, B] = -1.0
    out[:B, B + 1] = q[cls.reps] ** sigma
    out[B, :B] = cls.sizes
    return out


def symmetric_solution(d: int, sigma: int = 1, eta: float = 0.0) -> tuple[np.ndarray, float]:
    """Uniform state on ``{0,1}^d``: ``q_j = 2^-d``, ``Omega = eta 2^(-d sigma) - d``."""
    n = 2 ** d
    return np.full(n, 1.0 / n), eta * 2.0 ** (-d * sigma) - d


def symmetric_branch_points(d: int, sigma: int = 1) -> list[tuple[float, int]]:
    """Values of ``eta`` where the uniform state's Jacobian is singular.

    On ``{0,1}^d`` the graph Laplacian has eigenvalues ``2k`` with
    multiplicity ``C(d, k)``; at ``q = 2^-d`` the Jacobian restricted to
    mass-preserving directions is ``eta*sigma*q^(sigma-1) + L/(2q)``, which
    is singular at ``eta = -k 2^(d sigma) / sigma``.
    """
    return [(-k * 2.0 ** (d * sigma) / sigma, comb(d, k)) for k in range(1, d + 1)]


def scalar_pitchfork_residual(z: float, chi: float, sigma: int = 1) -> float:
    """Two-site reduction ``sqrt((1-z)/(1+z)) - chi (1+z)^s - sqrt((1+z)/(1-z)) + chi (1-z)^s``."""
    if not abs(z) < 1:
        raise DomainError(f"|z| must be below 1, got {z}")
    return (np.sqrt((1 - z) / (1 + z)) - chi * (1 + z) ** sigma
            - np.sqrt((1 + z) / (1 - z)) + chi * (1 - z) ** sigma)


def scalar_pitchfork_roots(chi: float, sigma: int = 1, n_scan: int = 4001) -> list[float]:
    """Nonzero roots of the two-site equation in ``(-1, 1)``.

    Closed form for ``sigma = 1``; otherwise sign changes on a uniform scan of
    ``(0, 1)`` are refined by bisection and mirrored (the residual is odd in z).
    """
    if sigma == 1:
        if chi >= -1:
            return []
        z = np.sqrt(chi * chi - 1.0) / abs(chi)
        return [float(z), float(-z)]
    zs = np.linspace(0.0, 1 - 1e-12, n_scan)[1:]
    vals = np.array([scalar_pitchfork_residual(z, chi, sigma) for z in zs])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        lo, hi = zs[i], zs[i + 1]
        flo = vals[i]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = scalar_pitchfork_residual(mid, chi, sigma)
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        roots.append(0.5 * (lo + hi))
    return [r for z in roots for r in (float(z), float(-z))]


class PitchforkRoot(NamedTuple):
    z: float
    Omega: float
    q: np.ndarray


def closed_form_1d(eta: float, sigma: int = 1) -> list[PitchforkRoot]:
    """Asymmetric double-well states ``q = ((1+z)/2, (1-z)/2)``."""
    out = []
    for z in scalar_pitchfork_roots(eta / 2.0 ** sigma, sigma):
        q = np.array([(1 + z) / 2, (1 - z) / 2])
        Omega = -np.sqrt(q[1] / q[0]) + eta * q[0] ** sigma
        out.append(PitchforkRoot(z, float(Omega), q))
    return out


def closed_form_2d_mirror(eta: float, sigma: int = 1, all_orientations: bool = False) -> list[PitchforkRoot]:
    """Four-well states with ``q_1 = q_2 = (1+z)/4``, ``q_3 = q_4 = (1-z)/4``.

    ``all_orientations`` adds the images with ``q_1 = q_3``, ``q_2 = q_4``.
    """
    out = []
    for z in scalar_pitchfork_roots(eta / 4.0 ** sigma, sigma):
        a, b = (1 + z) / 4, (1 - z) / 4
        Omega = -(1 + np.sqrt(b / a)) + eta * a ** sigma
        out.append(PitchforkRoot(z, float(Omega), np.array([a, a, b, b])))
        if all_orientations:
            out.append(PitchforkRoot(z, float(Omega), np.array([a, b, a, b])))
    return out


def closed_form_2d_point(eta: float, sigma: int = 1) -> list[PitchforkRoot]:
    """Four-well states with ``q_1 = q_4 = (1+z)/4``, ``q_2 = q_3 = (1-z)/4``."""
    out = []
    for z in scalar_pitchfork_roots(eta / (2 * 4.0 ** sigma), sigma):
        a, b = (1 + z) / 4, (1 - z) / 4
        Omega = -2 * np.sqrt(b / a) + eta * a ** sigma
        out.append(PitchforkRoot(z, float(Omega), np.array([a, b, b, a])))
    return out


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-12
    max_iter: int = 60
    damping: bool = True
    q_floor: float = 1e-10
    max_halvings: int = 30
    cond_max: float = 1e14


class NewtonResult(NamedTuple):
    q: np.ndarray
    Omega: float
    residual: float
    iterations: int


def solve_newton(q0, Omega0: float, params: StationaryParams, spec: LatticeSpec,
                 config: NewtonConfig = NewtonConfig(),
                 symmetry: SymmetryClass | None = None) -> NewtonResult:
    """Damped Newton iteration for the equal-phase system at fixed ``eta``.

    With ``symmetry`` the unknowns are the block values of that class, which
    removes the singular directions generated by the lattice symmetry.
    Steps are halved while they would push an occupation below
    ``config.q_floor`` or increase the residual.
    """
    cls = symmetry if symmetry is not None else SymmetryClass("none", tuple((k,) for k in range(spec.size)))
    if cls.n_sites != spec.size:
        raise DomainError("symmetry class does not match the lattice size")
    q0 = np.asarray(q0, dtype=float)
    if np.any(~(q0 > 0)):
        raise DomainError("initial occupations must be strictly positive")
    x = np.append(cls.reduce(q0), float(Omega0))
    B = cls.n_blocks
    eta, sigma = float(params.eta), params.sigma

    def resid(x):
        return reduced_residual(x[:B], x[B], eta, sigma, spec, cls)

    F = resid(x)
    norm = np.max(np.abs(F))
    for it in range(config.max_iter + 1):
        if norm <= config.tol:
            q = cls.expand(x[:B])
            return NewtonResult(q, float(x[B]), float(norm), it)
        if it == config.max_iter:
            break
        J = reduced_jacobian(x[:B], x[B], eta, sigma, spec, cls)[:, :B + 1]
        if np.linalg.cond(J) > config.cond_max:
            raise SingularJacobianError(
                f"Jacobian numerically singular at eta={eta} (near a bifurcation?)",
                state=cls.expand(x[:B]), residual=norm)
        dx = np.linalg.solve(J, -F)
        lam = 1.0
        for _ in range(config.max_halvings + 1):
            trial = x + lam * dx
            if np.all(trial[:B] > config.q_floor):
                F_trial = resid(trial)
                n_trial = np.max(np.abs(F_trial))
                if not config.damping or n_trial < norm or n_trial <= config.tol:
                    break
            lam *= 0.5
        else:
            if not np.all(trial[:B] > config.q_floor):
                raise ConvergenceError("damping could not keep occupations positive",
                                       state=cls.expand(x[:B]), residual=norm)
        x, F, norm = trial, F_trial, n_trial
    raise ConvergenceError(f"Newton did not converge in {config.max_iter} iterations "
                           f"(residual {norm:.3e})", state=cls.expand(x[:B]), residual=norm)
