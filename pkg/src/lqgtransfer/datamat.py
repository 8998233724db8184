"""Windowed data objects: the block data matrix, the shifted input block,
the rank law, and data-driven dimension estimation.

A depth-r window at time t stacks U_r(t) = [u(t); ...; u(t+r-1)] over
Y_r(t+1) = [y(t+1); ...; y(t+r)].  The block data matrix H places c
consecutive windows in its columns; the shifted input block pairs column
j with u(t0 + r + j).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientDataError
from .linalg import DEFAULT_TOL, ToleranceConfig, numerical_rank
from .lti import Trajectory

__all__ = [
    "DataMatrixPair",
    "stack_window",
    "build_pair",
    "expected_rank",
    "estimate_dimension",
]

# Windows copy exact samples, so the only rank noise is conditioning of the
# trajectory itself; this looser default absorbs it for noisy closed-loop data.
NOISY_RANK_TOL = ToleranceConfig(rank_tol=1e-6, residual_tol=1e-7)


@dataclass(frozen=True)
class DataMatrixPair:
    """Block data matrix H (r(m+l) x c) and shifted inputs Ubar (m x c)."""

    H: np.ndarray
    Ubar: np.ndarray
    r: int
    c: int
    t0: int


def _require_samples(traj: Trajectory, needed: int, what: str):
    if traj.n_samples < needed:
        raise InsufficientDataError(
            f"{what} needs {needed} samples (span {needed - 1}), trajectory "
            f"has {traj.n_samples}", required=needed)


def stack_window(traj: Trajectory, r: int, t: int):
    """(U_r, Y_r) = ([u(t); ...; u(t+r-1)], [y(t+1); ...; y(t+r)]).

    ``t`` is a local sample index into the trajectory.
    """
    if r < 1:
        raise DimensionError("window depth must be >= 1")
    if t < 0 or t + r > traj.span:
        raise InsufficientDataError(
            f"window [{t}, {t + r}] out of range for span {traj.span}",
            required=t + r + 1)
    U = traj.inputs[t:t + r].reshape(-1)
    Y = traj.outputs[t + 1:t + r + 1].reshape(-1)
    return U, Y


def build_pair(traj: Trajectory, r: int, c: int, t0: int = 0) -> DataMatrixPair:
    """Assemble H_{r,c} and the shifted input block from one trajectory.

    Column j of H is the window at t0 + j; column j of Ubar is
    u(t0 + r + j).  Requires t0 + r + c samples.
    """
    if r < 1 or c < 1:
        raise DimensionError("r and c must be >= 1")
    if t0 < 0:
        raise DimensionError("t0 must be nonnegative")
    _require_samples(traj, t0 + r + c, f"H_({r},{c}) at offset {t0}")
    m, l = traj.m, traj.l
    H = np.empty((r * (m + l), c))
    Ubar = np.empty((m, c))
    for j in range(c):
        U, Y = stack_window(traj, r, t0 + j)
        H[:r * m, j] = U
        H[r * m:, j] = Y
        Ubar[:, j] = traj.inputs[t0 + r + j]
    return DataMatrixPair(H=H, Ubar=Ubar, r=r, c=c, t0=t0)


def expected_rank(r: int, c: int, n: int, m: int, l: int) -> int:
    """Rank law for closed-loop window data: min{(m+l)r, c, n + lr}."""
    if min(r, c, n, m, l) < 1:
        raise DimensionError("all rank-law arguments must be positive")
    return min((m + l) * r, c, n + l * r)


def estimate_dimension(traj: Trajectory, r_max: int,
                       tol: ToleranceConfig = NOISY_RANK_TOL):
    """Estimate the state dimension n (and read off l) from one trajectory.

    Scans window depths r = 1..r_max using every available column (at
    least (m+l)(r+1) so the column count never binds the rank law) and
    returns n = rank - l r at the first depth where the data matrix drops
    below full row rank.
    """
    if r_max < 1:
        raise DimensionError("r_max must be >= 1")
    m, l = traj.m, traj.l
    for r in range(1, r_max + 1):
        c_min = (m + l) * (r + 1)
        c = traj.n_samples - r
        if c < c_min:
            raise InsufficientDataError(
                f"dimension scan at depth {r} needs {r + c_min} samples, "
                f"trajectory has {traj.n_samples}", required=r + c_min)
        pair = build_pair(traj, r, c)
        rank = numerical_rank(pair.H, tol)
        if rank < (m + l) * r:
            n_est = rank - l * r
            if n_est < 1:
                raise InsufficientDataError(
                    f"degenerate data: depth-{r} rank {rank} implies a "
                    "nonpositive state dimension", required=None)
            return n_est, l
    raise InsufficientDataError(
        f"no rank saturation detected up to depth {r_max}; the state "
        "dimension exceeds the scanned range or the data is degenerate",
        required=None)
