"""Model-based ground truth: Riccati solvers, LQR/Kalman gains, the dynamic
compensator, the static window-feedback gain, and its separation
decomposition into control and estimation factors.

Conventions (pinned by the golden batch-reactor values and the stability
requirements):

* LQR gain ``K = -(R + B'PB)^{-1} B'PA`` so that u = K x stabilizes,
  i.e. spectral_radius(A + BK) < 1.
* Kalman gain ``Lf = S C' (C S C' + V)^{-1}`` with S the prediction-error
  covariance from the filtering Riccati equation; the compensator uses the
  current-estimator form E = (I - Lf C) A, F = (I - Lf C) B, G = Lf.

For multi-input systems the static gain satisfying the window relation is
not unique (the data matrix loses row rank).  Two canonical
representatives are provided:

* :func:`static_lqg_gain` - the block pseudo-inverse formula; identical
  to the row-wise formula of :func:`static_gain_row_lemma2`.
* :func:`static_lqg_gain_rowspace` - the representative lying in the row
  space of the estimation matrix; equals the factored form
  ``K @ L_est`` of :func:`separation_decomposition` exactly, and equals
  :func:`static_lqg_gain` whenever m = 1.

Both reproduce the window relation on closed-loop data to machine
precision; they differ (for m > 1 only) off the subspace visited by the
data.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import (AssumptionViolationError, DimensionError,
                     InvalidInputError, NumericalFailureError)
from .linalg import (DEFAULT_TOL, ToleranceConfig, as_matrix, char_poly_coeffs,
                     numerical_rank, pseudo_inverse, spectral_radius)
from .lti import LinearSystem, Trajectory, check_controllable, check_observable, \
    simulate_closed_loop

__all__ = [
    "LqgTask",
    "Compensator",
    "BlockMatrices",
    "SeparationDecomposition",
    "solve_dare",
    "lqr_gain",
    "kalman_gain",
    "build_compensator",
    "block_matrices",
    "static_lqg_gain",
    "static_lqg_gain_rowspace",
    "static_gain_row_lemma2",
    "separation_decomposition",
    "check_assumption1",
    "expert_trajectory",
]


def _sym_sqrt(M):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


@dataclass(frozen=True)
class LqgTask:
    """Quadratic weights (Q PSD, R PD) of one LQG task."""

    Q: np.ndarray
    R: np.ndarray
    label: str = ""

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(self.R, "R")
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise DimensionError("Q and R must be square")
        tol = 1e-10
        if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -tol * max(1.0, np.linalg.norm(Q)):
            raise InvalidInputError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0.0:
            raise InvalidInputError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class Compensator:
    """Dynamic controller xh(t+1) = E xh + F u + G y(t+1), u = Hgain xh."""

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    Hgain: np.ndarray

    def __post_init__(self):
        E = as_matrix(self.E, "E")
        F = as_matrix(self.F, "F")
        G = as_matrix(self.G, "G")
        Hg = as_matrix(self.Hgain, "Hgain")
        n = E.shape[0]
        if E.shape[1] != n or F.shape[0] != n or G.shape[0] != n or Hg.shape[1] != n:
            raise DimensionError("compensator matrices are inconsistent")
        if Hg.shape[0] != F.shape[1]:
            raise DimensionError("Hgain rows must match input count of F")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "Hgain", Hg)

    @property
    def n(self) -> int:
        return self.E.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[1]

    @property
    def l(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class BlockMatrices:
    """Windowed compensator response blocks of depth n (see block_matrices)."""

    F_x: np.ndarray
    F_u: np.ndarray
    F_y: np.ndarray
    M_u: np.ndarray
    M_y: np.ndarray
    Mtil_u: np.ndarray
    Mtil_y: np.ndarray


@dataclass(frozen=True)
class SeparationDecomposition:
    """Factors of the static gain: K = [K_LQR, I_m], the estimation matrix
    L_est, and the power-reduction coefficients a of the filter matrix."""

    K: np.ndarray
    L_est: np.ndarray
    a: np.ndarray


def solve_dare(A, B, Q, R, tol: float = 1e-12, max_iter: int = 100000):
    """Fixed point of P <- A'PA - A'PB (R + B'PB)^{-1} B'PA + Q from P0 = Q.

    Returns the symmetric PSD stabilizing solution; raises
    NumericalFailureError with iteration diagnostics when the relative
    update has not dropped below ``tol`` within ``max_iter`` sweeps.
    """
    A = np.ascontiguousarray(as_matrix(A, "A"))
    B = np.ascontiguousarray(as_matrix(B, "B"))
    Q = np.ascontiguousarray(as_matrix(Q, "Q"))
    R = np.ascontiguousarray(as_matrix(R, "R"))
    n = A.shape[0]
    if A.shape[1] != n or B.shape[0] != n or Q.shape != (n, n):
        raise DimensionError("inconsistent DARE dimensions")
    if R.shape != (B.shape[1], B.shape[1]):
        raise DimensionError("R must be m x m")
    P, iters, converged, rel = _accel.dare_iterate(A, B, Q, R, float(tol), int(max_iter))
    if not converged:
        raise NumericalFailureError(
            f"Riccati iteration did not converge within {max_iter} sweeps "
            f"(last relative update {rel:.3e})",
            diagnostics={"iterations": iters, "relative_update": rel},
        )
    return P


def lqr_gain(sys: LinearSystem, task: LqgTask, tol: ToleranceConfig = DEFAULT_TOL):
    """Stabilizing LQR gain K = -(R + B'PB)^{-1} B'PA for u = K x."""
    if task.Q.shape[0] != sys.n or task.R.shape[0] != sys.m:
        raise DimensionError("task weights do not match the system")
    if not check_observable(sys.A, _sym_sqrt(task.Q), tol):
        raise AssumptionViolationError("(A, Q^(1/2)) must be observable")
    P = solve_dare(sys.A, sys.B, task.Q, task.R)
    return -np.linalg.solve(task.R + sys.B.T @ P @ sys.B, sys.B.T @ P @ sys.A)


def kalman_gain(sys: LinearSystem):
    """Steady-state filter gain Lf = S C'(C S C' + V)^{-1}.

    S solves the filtering Riccati equation
    S <- A S A' - A S C'(C S C' + V)^{-1} C S A' + W, the form consistent
    with the current-estimator compensator E = (I - Lf C) A.
    """
    S = solve_dare(sys.A.T, sys.C.T, sys.W, sys.V)
    return S @ sys.C.T @ np.linalg.inv(sys.C @ S @ sys.C.T + sys.V)


def build_compensator(sys: LinearSystem, task: LqgTask,
                      tol: ToleranceConfig = DEFAULT_TOL) -> Compensator:
    """Optimal dynamic compensator: Kalman filter plus LQR gain."""
    K = lqr_gain(sys, task, tol)
    Lf = kalman_gain(sys)
    I = np.eye(sys.n)
    return Compensator(E=(I - Lf @ sys.C) @ sys.A,
                       F=(I - Lf @ sys.C) @ sys.B,
                       G=Lf, Hgain=K)


def block_matrices(comp: Compensator, n: int | None = None) -> BlockMatrices:
    """Depth-n response blocks of the compensator recursion.

    F_x stacks Hgain E^i (i = 0..n-1); F_u = [E^(n-1)F, ..., F];
    M_u is strictly lower block-triangular with (i, j) block
    Hgain E^(i-j-1) F; Mtil_u drops the leading Hgain.  F_y, M_y, Mtil_y
    replace F by G.
    """
    if n is None:
        n = comp.n
    if n != comp.n:
        raise DimensionError("window depth must equal the compensator order")
    m, l = comp.m, comp.l
    E, F, G, Hg = comp.E, comp.F, comp.G, comp.Hgain
    powers = [np.eye(n)]
    for _ in range(n):
        powers.append(powers[-1] @ E)
    F_x = np.vstack([Hg @ powers[i] for i in range(n)])
    F_u = np.hstack([powers[n - 1 - j] @ F for j in range(n)])
    F_y = np.hstack([powers[n - 1 - j] @ G for j in range(n)])
    M_u = np.zeros((n * m, n * m))
    M_y = np.zeros((n * m, n * l))
    Mt_u = np.zeros((n * n, n * m))
    Mt_y = np.zeros((n * n, n * l))
    for i in range(n):
        for j in range(i):
            EF = powers[i - j - 1] @ F
            EG = powers[i - j - 1] @ G
            M_u[i * m:(i + 1) * m, j * m:(j + 1) * m] = Hg @ EF
            M_y[i * m:(i + 1) * m, j * l:(j + 1) * l] = Hg @ EG
            Mt_u[i * n:(i + 1) * n, j * m:(j + 1) * m] = EF
            Mt_y[i * n:(i + 1) * n, j * l:(j + 1) * l] = EG
    return BlockMatrices(F_x=F_x, F_u=F_u, F_y=F_y, M_u=M_u, M_y=M_y,
                         Mtil_u=Mt_u, Mtil_y=Mt_y)


def static_lqg_gain(comp: Compensator, n: int | None = None,
                    tol: ToleranceConfig = DEFAULT_TOL):
    """Static gain mapping [U_n(t); Y_n(t+1)] to u(t+n) (block formula).

    K = Hgain [F_u + E^n F_x^+ (I - M_u), F_y - E^n F_x^+ M_y]; requires
    F_x of full column rank (compensator observability).
    """
    if n is None:
        n = comp.n
    blocks = block_matrices(comp, n)
    if numerical_rank(blocks.F_x, tol) < n:
        raise AssumptionViolationError(
            "F_x is rank deficient: (E, Hgain) fails the observability "
            "assumption required for the static gain")
    En = np.linalg.matrix_power(comp.E, n)
    Fxp = pseudo_inverse(blocks.F_x, tol)
    left = blocks.F_u + En @ Fxp @ (np.eye(n * comp.m) - blocks.M_u)
    right = blocks.F_y - En @ Fxp @ blocks.M_y
    return comp.Hgain @ np.hstack([left, right])


def _selection_matrix(i: int, n: int, m: int):
    """S_i picks the i-th input's rows out of the interleaved window stack."""
    S = np.zeros((n, n * m))
    for j in range(n):
        S[j, j * m + i] = 1.0
    return S


def static_gain_row_lemma2(comp: Compensator, n: int | None = None, i: int = 0,
                           tol: ToleranceConfig = DEFAULT_TOL,
                           selection: bool = False):
    """Row i of the static gain via the per-row window inversion.

    Uses the single-row observability stack F_x^i = [h_i; h_i E; ...] with
    h_i the i-th row of Hgain, and a matrix P_i with P_i F_x = F_x^i.
    ``selection=False`` (default) takes P_i = F_x^i F_x^+, which
    reproduces the rows of :func:`static_lqg_gain` exactly;
    ``selection=True`` takes the row-selection P_i, which reproduces the
    rows of ``K @ L_est`` exactly.  Both coincide when m = 1.
    """
    if n is None:
        n = comp.n
    m = comp.m
    if not 0 <= i < m:
        raise DimensionError(f"row index {i} out of range for m = {m}")
    blocks = block_matrices(comp, n)
    Si = _selection_matrix(i, n, m)
    Fxi = Si @ blocks.F_x
    if numerical_rank(Fxi, tol) < n:
        raise AssumptionViolationError(
            f"(E, Hgain row {i}) is not observable: F_x^{i} is singular")
    if selection:
        Pi = Si
    else:
        Pi = Fxi @ pseudo_inverse(blocks.F_x, tol)
    Mui = Pi @ blocks.M_u
    Myi = Pi @ blocks.M_y
    En = np.linalg.matrix_power(comp.E, n)
    EnFxi = En @ np.linalg.inv(Fxi)
    hi = comp.Hgain[i:i + 1]
    return hi @ np.hstack([blocks.F_u + EnFxi @ (Pi - Mui),
                           blocks.F_y - EnFxi @ Myi])


def static_lqg_gain_rowspace(comp: Compensator, n: int | None = None,
                             tol: ToleranceConfig = DEFAULT_TOL):
    """The static-gain representative lying in the estimation-matrix row space.

    Stacks the per-row gains built with the selection P_i; equals
    ``K @ L_est`` of :func:`separation_decomposition` identically and
    :func:`static_lqg_gain` whenever m = 1.
    """
    if n is None:
        n = comp.n
    return np.vstack([
        static_gain_row_lemma2(comp, n, i, tol, selection=True)
        for i in range(comp.m)
    ])


def separation_decomposition(comp: Compensator, n: int | None = None,
                             tol: ToleranceConfig = DEFAULT_TOL) -> SeparationDecomposition:
    """Factor the static gain as [K_LQR, I_m] times the estimation matrix.

    L_est = [[F_u - (a x I_n) Mtil_u, F_y - (a x I_n) Mtil_y],
             [a x I_m, 0]] with a the coefficients expressing E^n against
    lower powers of E.  L_est depends only on (E, F, G) - not on the task
    weights - and has full row rank n + m.
    """
    if n is None:
        n = comp.n
    blocks = block_matrices(comp, n)
    m, l = comp.m, comp.l
    a = char_poly_coeffs(comp.E, tol)
    arow = a.reshape(1, -1)
    aIn = np.kron(arow, np.eye(n))
    top = np.hstack([blocks.F_u - aIn @ blocks.Mtil_u,
                     blocks.F_y - aIn @ blocks.Mtil_y])
    bottom = np.hstack([np.kron(arow, np.eye(m)), np.zeros((m, n * l))])
    L_est = np.vstack([top, bottom])
    K = np.hstack([comp.Hgain, np.eye(m)])
    return SeparationDecomposition(K=K, L_est=L_est, a=a)


def check_assumption1(comp: Compensator, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Observability of (E, row_i(Hgain)) for every i and controllability
    of (E, G)."""
    for i in range(comp.m):
        if not check_observable(comp.E, comp.Hgain[i:i + 1], tol):
            return False
    return check_controllable(comp.E, comp.G, tol)


def expert_trajectory(sys: LinearSystem, task: LqgTask, span: int, seed: int,
                      burn_in: int = 0, tol: ToleranceConfig = DEFAULT_TOL) -> Trajectory:
    """Optimal closed-loop trajectory of the given span for one task.

    Simulates the optimal compensator from zero initial conditions and
    drops the first ``burn_in`` samples (the window relation is exact
    regardless, so the default is no burn-in).
    """
    comp = build_compensator(sys, task, tol)
    traj = simulate_closed_loop(sys, comp, span + burn_in, seed)
    if burn_in:
        traj = Trajectory(traj.inputs[burn_in:], traj.outputs[burn_in:],
                          start_time=0, seed=seed, task_label=task.label)
    else:
        traj = Trajectory(traj.inputs, traj.outputs, start_time=0,
                          seed=seed, task_label=task.label)
    return traj
