"""Imitation and transfer learning for static output-feedback LQG control.

Learns static window-feedback LQG controllers from expert input/output
trajectories, factors them into a task-invariant estimation matrix and a
task-specific control matrix, and transfers the estimation matrix across
tasks to cut the expert data needed for new controllers.
"""

from ._accel import NUMBA_ENABLED
from .datamat import DataMatrixPair, build_pair, estimate_dimension, \
    expected_rank, stack_window
from .errors import (AssumptionViolationError, DimensionError, DiversityError,
                     InconsistentDataError, InsufficientDataError,
                     InvalidInputError, LqgTransferError, NumericalFailureError)
from .imitation import LearnedGain, learn_klqg
from .linalg import (DEFAULT_TOL, ToleranceConfig, char_poly_coeffs,
                     intersect_kernels, kron, nullspace_basis, numerical_rank,
                     orth_complement_basis, principal_angles, pseudo_inverse,
                     spectral_radius, vec)
from .lti import (LinearSystem, Trajectory, check_controllable,
                  check_observable, closed_loop_matrix, lqg_cost_estimate,
                  simulate_closed_loop, simulate_static_closed_loop,
                  static_lqg_cost_estimate, trajectory_from_csv,
                  trajectory_from_json, trajectory_to_csv, trajectory_to_json)
from .oracle import (BlockMatrices, Compensator, LqgTask,
                     SeparationDecomposition, block_matrices,
                     build_compensator, check_assumption1, expert_trajectory,
                     kalman_gain, lqr_gain, separation_decomposition,
                     solve_dare, static_gain_row_lemma2, static_lqg_gain,
                     static_lqg_gain_rowspace)
from .reactor import (REFERENCE_ESTIMATOR_ROWS, REFERENCE_TARGET_GAIN,
                      batch_reactor, batch_reactor_two_input,
                      reactor_source_tasks, reactor_target_task)
from .transfer import (LearnedEstimator, SourceDataset, TargetResult,
                       check_assumption2, check_persistency,
                       estimator_from_json, estimator_from_rowspace,
                       estimator_to_json, learn_lest_multi_bilinear,
                       learn_lest_multi_kernel, learn_lest_single_input,
                       learn_target_gain, subspace_error)

__version__ = "0.1.0"
