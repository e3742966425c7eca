"""Time evolution of the N-mode system and its conserved quantities.

The equations ``i hbar d' = T d + epsc |d|^(2 sigma) d`` are integrated in
the complex chart ``y = [Re d, Im d]``, which is smooth everywhere (the
``(q, theta)`` chart is singular where an occupation vanishes).  Norm and
energy are logged at each sample, never enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import BACKEND, kernels
from .errors import ConvergenceError, DomainError, StepUnderflowError
from .lattice import HoppingMatrix, LatticeSpec, hypercube
from .stationary import NORM_TOL, ModeState

__all__ = [
    "DynamicsConfig",
    "Trajectory",
    "ConservationReport",
    "evolve",
    "energy",
    "hamiltonian_value",
    "hamiltonian_rhs",
    "verify_conservation",
]


@dataclass(frozen=True)
class DynamicsConfig:
    """Integrator settings.  Defaults are reduced units (``hbar = 1``)."""

    hbar: float = 1.0
    epsilon_c: float = 0.0
    sigma: int = 1
    t_span: tuple[float, float] = (0.0, 10.0)
    dt_initial: float = 1e-3
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise DomainError(f"sigma must be a positive integer, got {self.sigma}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise DomainError(f"t_span must be increasing, got {self.t_span}")
        if not (self.dt_initial > 0 and self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("dt_initial, rel_tol and abs_tol must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # complex, one row per sample
    invariants_log: np.ndarray  # columns: norm, hamiltonian
    n_accepted: int = 0
    n_rejected: int = 0
    backend: str = field(default=BACKEND)

    @property
    def q(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def norms(self) -> np.ndarray:
        return self.invariants_log[:, 0]

    @property
    def energies(self) -> np.ndarray:
        return self.invariants_log[:, 1]


@dataclass(frozen=True)
class ConservationReport:
    max_norm_drift: float
    max_H_drift: float
    H0: float


def energy(d, T: HoppingMatrix, epsilon_c: float, sigma: int) -> np.ndarray:
    """``Re(d^* T d) + epsc/(sigma+1) sum |d|^(2 sigma + 2)``, row-wise for 2-d input."""
    d = np.asarray(d, dtype=complex)
    lin = np.real(np.einsum("...i,ij,...j->...", d.conj(), T.entries, d))
    nl = epsilon_c / (sigma + 1) * np.sum(np.abs(d) ** (2 * sigma + 2), axis=-1)
    return lin + nl


def evolve(d0, T: HoppingMatrix, config: DynamicsConfig, n_samples: int = 201, t_eval=None) -> Trajectory:
    """Integrate from ``d0`` over ``config.t_span``.

    Samples are taken at ``t_eval`` when given (must start at ``t_span[0]``
    and increase), otherwise at ``n_samples`` equally spaced times.  Uses
    the adaptive Dormand-Prince 5(4) kernel of the active backend.
    """
    d0 = np.asarray(d0, dtype=complex)
    if d0.shape != (T.size,):
        raise DomainError(f"initial state has shape {d0.shape}, expected ({T.size},)")
    norm0 = float(np.sum(np.abs(d0) ** 2))
    if abs(norm0 - 1.0) > NORM_TOL:
        raise DomainError(f"initial state is not normalized: |d|^2 = {norm0:.15g}")
    t0, t1 = config.t_span
    if t_eval is None:
        if n_samples < 2:
            raise DomainError("n_samples must be at least 2")
        t_eval = np.linspace(t0, t1, n_samples)
    else:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval[0] != t0 or np.any(np.diff(t_eval) <= 0):
            raise DomainError("t_eval must start at t_span[0] and be strictly increasing")
    indptr, indices, data = T.csr()
    y0 = np.ascontiguousarray(np.concatenate([d0.real, d0.imag]))
    h_min = 1e-14 * max(1.0, abs(t_eval[-1]))
    Y, n_acc, n_rej, status = kernels.dopri5(y0, indptr, indices, data, float(config.epsilon_c),
                                             int(config.sigma), float(config.hbar), np.ascontiguousarray(t_eval),
                                             float(config.dt_initial), float(config.rel_tol),
                                             float(config.abs_tol), int(config.max_steps), h_min)
    if status == 2:
        raise StepUnderflowError(f"step size fell below {h_min:g} after {n_acc} steps")
    if status == 1:
        raise ConvergenceError(f"max_steps={config.max_steps} exhausted")
    n = T.size
    states = Y[:, :n] + 1j * Y[:, n:]
    log = np.column_stack([np.sum(np.abs(states) ** 2, axis=1),
                           energy(states, T, config.epsilon_c, config.sigma)])
    return Trajectory(t_eval, states, log, int(n_acc), int(n_rej))


def _spec_for(n: int, spec: LatticeSpec | None) -> LatticeSpec:
    if spec is not None:
        if spec.size != n:
            raise DomainError(f"state has {n} sites, lattice has {spec.size}")
        return spec
    d = int(round(np.log2(n)))
    if 2 ** d != n:
        raise DomainError(f"cannot infer a hypercube lattice for {n} sites; pass spec")
    return hypercube(d)


def hamiltonian_value(state: ModeState, lambda_D: float, beta: float, epsilon_c: float, sigma: int,
                      spec: LatticeSpec | None = None) -> float:
    """Energy in the ``(q, theta)`` chart, neighbour sum over ordered pairs.

    ``spec`` defaults to the ``{0,1}^d`` box matching the state size.
    """
    spec = _spec_for(state.q.size, spec)
    q, th = state.q, state.theta
    indptr, idx = spec.neighbor_csr
    rows = np.repeat(np.arange(spec.size), np.diff(indptr))
    hop = np.sum(np.sqrt(q[rows] * q[idx]) * np.cos(th[idx] - th[rows]))
    return float(lambda_D * q.sum() - beta * hop + epsilon_c / (sigma + 1) * np.sum(q ** (sigma + 1)))


def hamiltonian_rhs(state: ModeState, lambda_D: float, beta: float, epsilon_c: float, sigma: int,
                    spec: LatticeSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(hbar q', hbar theta')`` from the Hamiltonian form of the equations.

    Requires every occupation to be positive (the phase equation divides
    by ``sqrt(q_j)``).
    """
    spec = _spec_for(state.q.size, spec)
    q, th = state.q, state.theta
    if np.any(q <= 0):
        raise DomainError("phase equation undefined where an occupation vanishes")
    indptr, idx = spec.neighbor_csr
    rows = np.repeat(np.arange(spec.size), np.diff(indptr))
    dth = th[idx] - th[rows]
    n = spec.size
    qdot = -2 * beta * np.bincount(rows, np.sqrt(q[rows] * q[idx]) * np.sin(dth), minlength=n)
    thdot = (-lambda_D + beta * np.bincount(rows, np.sqrt(q[idx] / q[rows]) * np.cos(dth), minlength=n)
             - epsilon_c * q ** sigma)
    return qdot, thdot


def verify_conservation(traj: Trajectory) -> ConservationReport:
    """Largest deviation of norm and energy from their initial values."""
    if len(traj.times) == 0:
        raise DomainError("empty trajectory")
    log = traj.invariants_log
    return ConservationReport(float(np.max(np.abs(log[:, 0] - log[0, 0]))),
                              float(np.max(np.abs(log[:, 1] - log[0, 1]))), float(log[0, 1]))
