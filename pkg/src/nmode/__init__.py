"""Tight-binding (N-mode) reduction of the Gross-Pitaevskii equation on
lattices of wells: spectra, stationary states, continuation, dynamics."""

from ._backend import BACKEND
from .errors import ConvergenceError, DomainError, NModeError, SingularJacobianError, StepUnderflowError
from .lattice import (HoppingMatrix, LatticeSpec, SpectrumMultiset, adjacency, build_hopping_matrix,
                      build_index_set, ground_state_vector, hypercube, spectrum_dense, spectrum_recursive)
from .stationary import (ModeState, NewtonConfig, StationaryParams, closed_form_1d, closed_form_2d_mirror,
                         closed_form_2d_point, jacobian_positive, residual_full, residual_positive,
                         scalar_pitchfork_residual, solve_newton, symmetric_solution)
from .continuation import (Branch, BifurcationEvent, BranchPoint, Diagram, StepControl, branch_switch,
                           continue_branch, detect_events, family_branch, family_state, locate_fold,
                           sweep_ground_diagram)
from .dynamics import DynamicsConfig, Trajectory, evolve, hamiltonian_value, verify_conservation
from .potential import (GridSpec, LatticeGeometry, WellProfile, agmon_s0, effective_nonlinearity_c,
                        harmonic_ground_energy, lattice_potential_eval, reconstruct_wavefunction)

__version__ = "0.1.0"
