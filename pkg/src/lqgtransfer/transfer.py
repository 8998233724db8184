"""Learning the task-invariant estimation matrix from source tasks and the
target controller from a short trajectory.

The estimation matrix is identifiable only up to an invertible left
factor, so learned estimators are canonicalized to orthonormal rows and
all contracts are stated on row spaces and on products ``K_hat @ L_hat``.

Single-input sources admit the exact kernel-intersection solution.  For
multi-input sources the learned per-task gains are non-unique and two
iterative procedures are provided: an alternating-projection search for
corrections that align all task gains in one low-dimensional row space,
and an alternating-least-squares fit of the bilinear factorization.  Both
are nonconvex heuristics; they report convergence diagnostics instead of
guaranteeing success.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .datamat import build_pair
from .errors import (AssumptionViolationError, DimensionError, DiversityError,
                     InsufficientDataError, NumericalFailureError)
from .imitation import LearnedGain, learn_klqg
from .linalg import (DEFAULT_TOL, ToleranceConfig, as_matrix,
                     intersect_kernels, numerical_rank, nullspace_basis,
                     orth_complement_basis, pseudo_inverse)
from .lti import Trajectory

__all__ = [
    "SourceDataset",
    "LearnedEstimator",
    "TargetResult",
    "learn_lest_single_input",
    "check_assumption2",
    "check_persistency",
    "learn_target_gain",
    "learn_lest_multi_kernel",
    "learn_lest_multi_bilinear",
    "subspace_error",
    "estimator_from_rowspace",
    "estimator_to_json",
    "estimator_from_json",
]


@dataclass
class SourceDataset:
    """One source task's expert trajectory plus a cached learned gain."""

    traj: Trajectory
    label: str = ""
    learned_gain: LearnedGain | None = None


@dataclass(frozen=True)
class LearnedEstimator:
    """Estimation matrix learned from data, canonicalized to orthonormal rows.

    ``kernel_basis`` spans Ker(L_hat); ``method`` names the procedure that
    produced the estimate; ``diagnostics`` carries iteration counts and
    final objectives where applicable.
    """

    L_hat: np.ndarray
    kernel_basis: np.ndarray
    method: str
    n: int
    m: int
    l: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TargetResult:
    """Target controller learned through a transferred estimator."""

    K_hat: np.ndarray
    K_target: np.ndarray
    residual: float
    trajectory_length_used: int


def _orth_rows(M, tol: ToleranceConfig, rows: int):
    """Orthonormal basis (as rows) of the leading ``rows``-dim row space."""
    _, _, Vt = np.linalg.svd(as_matrix(M))
    return Vt[:rows].copy()


def _estimator(L_rows, method, n, m, l, tol, diagnostics=None) -> LearnedEstimator:
    L_hat = _orth_rows(L_rows, tol, n + m)
    kernel = nullspace_basis(L_hat, tol)
    return LearnedEstimator(L_hat=L_hat, kernel_basis=kernel, method=method,
                            n=n, m=m, l=l, diagnostics=dict(diagnostics or {}))


def _source_gains(datasets, n, tol):
    gains = []
    for ds in datasets:
        if ds.learned_gain is None:
            ds.learned_gain = learn_klqg(ds.traj, n, tol)
        gains.append(ds.learned_gain.K)
    return gains


def learn_lest_single_input(datasets, n: int,
                            tol: ToleranceConfig = DEFAULT_TOL,
                            kernel_rank_tol: float = 1e-7) -> LearnedEstimator:
    """Exact estimator recovery for single-input sources.

    Learns each source gain, intersects their kernels (stack + single
    SVD), checks the intersection has dimension n(m+l) - (n+m), and
    returns the orthonormal row basis of the complement.

    ``kernel_rank_tol`` governs the intersection's rank decision.  Gains
    learned from finite trajectories carry pseudo-inverse roundoff well
    above machine precision (relative errors up to ~1e-8 for poorly
    conditioned draws), while genuinely diverse task families keep the
    stacked-gain spectrum above ~1e-6; the 1e-7 default separates the
    two, and insufficiently diverse families surface as DiversityError
    instead of returning a corrupted estimator.
    """
    if not datasets:
        raise DiversityError("at least one source dataset required")
    m = datasets[0].traj.m
    l = datasets[0].traj.l
    if m != 1:
        raise DimensionError(
            f"kernel intersection requires single-input data, got m = {m}")
    gains = _source_gains(datasets, n, tol)
    kernel = intersect_kernels(
        gains, ToleranceConfig(rank_tol=kernel_rank_tol,
                               residual_tol=tol.residual_tol))
    expected = n * (m + l) - (n + m)
    if kernel.shape[1] != expected:
        raise DiversityError(
            f"kernel intersection has dimension {kernel.shape[1]}, expected "
            f"{expected}: source tasks are not diverse enough",
            achieved=kernel.shape[1], expected=expected)
    L_hat = orth_complement_basis(kernel, tol, ambient=n * (m + l))
    return _estimator(L_hat, "single-input-kernel", n, m, l, tol,
                      {"n_sources": len(datasets)})


def check_assumption2(K_list, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff the stacked control matrices have trivial common kernel."""
    mats = [as_matrix(K, f"K_{i}") for i, K in enumerate(K_list)]
    cols = mats[0].shape[1]
    for i, K in enumerate(mats):
        if K.shape[1] != cols:
            raise DimensionError(f"K_{i} has {K.shape[1]} columns, expected {cols}")
    return numerical_rank(np.vstack(mats), tol) == cols


def check_persistency(L, H_target, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Excitation check: the data image avoids the estimator kernel.

    Operationally rank(L H) must equal min(rank H, rank L); when the data
    matrix has at most n+m columns this is exactly triviality of
    Ker(L) intersected with Im(H).  The product's singular values are
    thresholded against the input scales sigma_max(L) sigma_max(H), not
    against the product's own largest value, so a collapsed product reads
    as rank deficient.
    """
    L = as_matrix(L, "L")
    H = as_matrix(H_target, "H_target")
    if L.shape[1] != H.shape[0]:
        raise DimensionError("estimator and data matrix dimensions differ")
    s_L = np.linalg.svd(L, compute_uv=False)
    s_H = np.linalg.svd(H, compute_uv=False)
    if s_L[0] == 0.0 or s_H[0] == 0.0:
        return False
    rank_L = int(np.sum(s_L > tol.rank_tol * s_L[0]))
    rank_H = int(np.sum(s_H > tol.rank_tol * s_H[0]))
    s_LH = np.linalg.svd(L @ H, compute_uv=False)
    rank_LH = int(np.sum(s_LH > tol.rank_tol * s_L[0] * s_H[0]))
    return rank_LH == min(rank_H, rank_L)


def learn_target_gain(est: LearnedEstimator, target_traj: Trajectory, n: int,
                      tol: ToleranceConfig = DEFAULT_TOL) -> TargetResult:
    """Solve for the target control matrix through a learned estimator.

    Builds the depth-n data pair from the target trajectory (needs span
    >= 2n + m - 1 so there are at least n + m columns), checks
    persistency, and solves Ubar = K_hat (L_hat H) exactly (square case)
    or by least squares.
    """
    m = target_traj.m
    min_span = 2 * n + m - 1
    if target_traj.span < min_span:
        raise InsufficientDataError(
            f"target learning needs span >= {min_span} ({min_span + 1} "
            f"samples), got span {target_traj.span}", required=min_span + 1)
    c = target_traj.span - n + 1
    pair = build_pair(target_traj, n, c)
    L_hat = est.L_hat
    if not check_persistency(L_hat, pair.H, tol):
        raise AssumptionViolationError(
            "target data is not persistently exciting: the data image "
            "meets the estimator kernel")
    LH = L_hat @ pair.H
    rows = L_hat.shape[0]
    if numerical_rank(LH, tol) < rows:
        raise NumericalFailureError(
            "L_hat H is singular at the working tolerance",
            diagnostics={"rank": numerical_rank(LH, tol), "needed": rows})
    if c == rows:
        K_hat = pair.Ubar @ np.linalg.inv(LH)
    else:
        K_hat = np.linalg.lstsq(LH.T, pair.Ubar.T, rcond=None)[0].T
    K_target = K_hat @ L_hat
    residual = float(np.linalg.norm(pair.Ubar - K_hat @ LH)
                     / max(1.0, np.linalg.norm(pair.Ubar)))
    return TargetResult(K_hat=K_hat, K_target=K_target, residual=residual,
                        trajectory_length_used=target_traj.span)


def _left_null_rows(H, tol):
    """Orthonormal rows spanning the left null space of H."""
    U, s, _ = np.linalg.svd(H)
    rank = 0
    if s.size and s[0] > 0.0:
        rank = int(np.sum(s > tol.rank_tol * s[0]))
    return U[:, rank:].T.copy()


def learn_lest_multi_kernel(datasets, n: int, m: int,
                            tol: ToleranceConfig = DEFAULT_TOL,
                            max_iter: int = 20000,
                            restarts: int = 4,
                            seed: int = 0) -> LearnedEstimator:
    """Correction-based estimator search for multi-input sources.

    Per task the minimum-norm gain is defined only up to additions from
    the left null space of the data matrix; alternating projection looks
    for corrections making all task gains share one (n+m)-dimensional row
    space: (a) truncated SVD onto rank n+m, (b) per-block projection back
    onto the affine set of admissible gains.  Deterministic restarts
    perturb the initial stack; the best final rank-gap wins.  Converged or
    not, the top row space of the best iterate is returned with
    diagnostics (``converged`` flag, iterations, final rank gap).
    """
    if not datasets:
        raise DiversityError("at least one source dataset required")
    l = datasets[0].traj.l
    if m != datasets[0].traj.m:
        raise DimensionError("m disagrees with the datasets")
    rows = n + m
    gains = _source_gains(datasets, n, tol)
    Zs = []
    for ds in datasets:
        c = ds.traj.span - n + 1
        pair = build_pair(ds.traj, n, c)
        Zs.append(_left_null_rows(pair.H, tol))
    N = len(datasets)
    if m * N < rows:
        raise DiversityError(
            f"{N} sources provide only {m * N} gain rows; at least {rows} "
            "are needed", achieved=m * N, expected=rows)

    def proj_affine(S):
        out = np.empty_like(S)
        for i in range(N):
            blk = S[i * m:(i + 1) * m]
            Zi = Zs[i]
            if Zi.shape[0]:
                out[i * m:(i + 1) * m] = gains[i] + (blk - gains[i]) @ Zi.T @ Zi
            else:
                out[i * m:(i + 1) * m] = gains[i]
        return out

    def rank_gap(S):
        s = np.linalg.svd(S, compute_uv=False)
        if s.size <= rows or s[0] == 0.0:
            return 0.0
        return float(s[rows] / s[0])

    base = np.vstack(gains)
    rng = np.random.default_rng(seed)
    best_gap, best_S, best_it = np.inf, base, 0
    stall_window = 300
    for rs in range(max(1, restarts)):
        S = base.copy() if rs == 0 else proj_affine(
            base + rng.normal(scale=np.linalg.norm(base) / base.size ** 0.5,
                              size=base.shape))
        it = 0
        gap = rank_gap(S)
        stall_ref, stall_at = gap, 0
        while gap > tol.rank_tol and it < max_iter:
            U_, s_, Vt_ = np.linalg.svd(S, full_matrices=False)
            S = proj_affine((U_[:, :rows] * s_[:rows]) @ Vt_[:rows])
            gap = rank_gap(S)
            it += 1
            if gap < 0.99 * stall_ref:
                stall_ref, stall_at = gap, it
            elif it - stall_at >= stall_window:
                break
        if gap < best_gap:
            best_gap, best_S, best_it = gap, S, it
        if best_gap <= tol.rank_tol:
            break
    converged = best_gap <= tol.rank_tol
    return _estimator(best_S, "multi-kernel-correction", n, m, l, tol,
                      {"iterations": best_it, "rank_gap": best_gap,
                       "converged": bool(converged), "n_sources": N})


def learn_lest_multi_bilinear(datasets, n: int, m: int,
                              tol: ToleranceConfig = DEFAULT_TOL,
                              max_iter: int = 500,
                              seed: int = 0,
                              starts: int = 5) -> LearnedEstimator:
    """Alternating least squares on the bilinear gain factorization.

    Minimizes the stacked residual of vec(Ubar_i) against
    (H_i' kron K_i) vec(L): with L fixed each K_i is an independent least
    squares; with all K_i fixed, vec(L) solves the stacked system.  Starts
    from the row space of the minimum-norm gains plus seeded random
    orthonormal initializations; the lowest final objective wins (ties by
    start index).  Non-convergence is reported in diagnostics, not raised.
    """
    if not datasets:
        raise DiversityError("at least one source dataset required")
    l = datasets[0].traj.l
    rows = n + m
    amb = n * (m + l)
    pairs = []
    for ds in datasets:
        c = ds.traj.span - n + 1
        pairs.append(build_pair(ds.traj, n, c))
    gains = _source_gains(datasets, n, tol)
    bstk = np.concatenate([p.Ubar.flatten(order="F") for p in pairs])

    def objective_and_step(L):
        Arows = []
        for p in pairs:
            Ki = p.Ubar @ pseudo_inverse(L @ p.H, tol)
            Arows.append(np.kron(p.H.T, Ki))
        Astk = np.vstack(Arows)
        vecL, *_ = np.linalg.lstsq(Astk, bstk, rcond=None)
        Lnew = vecL.reshape((rows, amb), order="F")
        obj = float(np.linalg.norm(Astk @ vecL - bstk) ** 2)
        return Lnew, obj

    rng = np.random.default_rng(seed)
    inits = [_orth_rows(np.vstack(gains), tol, rows)]
    for _ in range(max(0, starts - 1)):
        Q, _ = np.linalg.qr(rng.standard_normal((amb, rows)))
        inits.append(Q.T.copy())

    best = None
    for idx, L0 in enumerate(inits):
        L = L0.copy()
        obj_prev = np.inf
        it = 0
        converged = False
        for it in range(1, max_iter + 1):
            L, obj = objective_and_step(L)
            if obj_prev - obj <= tol.residual_tol ** 2 * max(1.0, obj):
                converged = True
                obj_prev = obj
                break
            obj_prev = obj
        cand = (obj_prev, idx, L, it, converged)
        if best is None or cand[0] < best[0]:
            best = cand
    obj, idx, L, it, converged = best
    return _estimator(L, "bilinear-als", n, m, l, tol,
                      {"objective": obj, "iterations": it, "start": idx,
                       "converged": bool(converged), "n_sources": len(datasets)})


def subspace_error(K_target, est: LearnedEstimator) -> float:
    """Spectral norm of K_target (I - L_hat^+ L_hat)."""
    K = as_matrix(K_target, "K_target")
    L = est.L_hat
    if K.shape[1] != L.shape[1]:
        raise DimensionError("gain and estimator live in different spaces")
    P = pseudo_inverse(L) @ L
    return float(np.linalg.norm(K @ (np.eye(L.shape[1]) - P), 2))


def estimator_from_rowspace(L_rows, n: int, m: int, l: int,
                            tol: ToleranceConfig = DEFAULT_TOL,
                            method: str = "model-rowspace") -> LearnedEstimator:
    """Wrap an externally supplied estimation matrix as a LearnedEstimator."""
    L = as_matrix(L_rows, "L_rows")
    if L.shape != (n + m, n * (m + l)):
        raise DimensionError(
            f"expected shape {(n + m, n * (m + l))}, got {L.shape}")
    return _estimator(L, method, n, m, l, tol)


def estimator_to_json(est: LearnedEstimator) -> str:
    return json.dumps({
        "n": est.n,
        "m": est.m,
        "l": est.l,
        "method": est.method,
        "L_hat": [[float(x) for x in row] for row in est.L_hat],
        "diagnostics": est.diagnostics,
    })


def estimator_from_json(text: str) -> LearnedEstimator:
    env = json.loads(text)
    L_hat = np.array(env["L_hat"], dtype=float)
    n, m, l = int(env["n"]), int(env["m"]), int(env["l"])
    if L_hat.shape != (n + m, n * (m + l)):
        raise DimensionError("serialized estimator has inconsistent shape")
    kernel = nullspace_basis(L_hat)
    return LearnedEstimator(L_hat=L_hat, kernel_basis=kernel,
                            method=str(env["method"]), n=n, m=m, l=l,
                            diagnostics=dict(env.get("diagnostics") or {}))
