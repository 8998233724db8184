"""Tolerance-aware dense linear-algebra kernels used by every other module.

Matrices are plain 2-D float64 ``numpy.ndarray``s.  Every public operation
validates finiteness and takes an optional :class:`ToleranceConfig`; rank
decisions use relative singular-value thresholding throughout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError, NumericalFailureError

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOL",
    "as_matrix",
    "numerical_rank",
    "pseudo_inverse",
    "nullspace_basis",
    "intersect_kernels",
    "orth_complement_basis",
    "kron",
    "vec",
    "char_poly_coeffs",
    "spectral_radius",
    "principal_angles",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Relative thresholds for rank decisions and residual checks.

    rank_tol: singular values below ``rank_tol * sigma_max`` count as zero.
    residual_tol: relative residual accepted when checking equation solves.
    """

    rank_tol: float = 1e-9
    residual_tol: float = 1e-7

    def __post_init__(self):
        if not (self.rank_tol > 0 and self.residual_tol > 0):
            raise InvalidInputError("tolerances must be strictly positive")


DEFAULT_TOL = ToleranceConfig()


def as_matrix(M, name="matrix"):
    """Validate and return ``M`` as a 2-D float64 array with finite entries."""
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.size == 0:
        raise InvalidInputError(f"{name} must be nonempty")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def numerical_rank(M, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Number of singular values exceeding ``rank_tol`` times the largest.

    The zero matrix has rank 0.
    """
    A = as_matrix(M)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.rank_tol * s[0]))


def pseudo_inverse(M, tol: ToleranceConfig = DEFAULT_TOL):
    """Moore-Penrose pseudo-inverse with sub-threshold singular values zeroed."""
    A = as_matrix(M)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size and s[0] > 0.0:
        keep = s > tol.rank_tol * s[0]
    else:
        keep = np.zeros_like(s, dtype=bool)
    sinv = np.zeros_like(s)
    sinv[keep] = 1.0 / s[keep]
    return (Vt.T * sinv) @ U.T


def nullspace_basis(M, tol: ToleranceConfig = DEFAULT_TOL):
    """Orthonormal columns spanning Ker(M); shape (cols, kernel_dim)."""
    A = as_matrix(M)
    _, s, Vt = np.linalg.svd(A)
    rank = 0
    if s.size and s[0] > 0.0:
        rank = int(np.sum(s > tol.rank_tol * s[0]))
    return Vt[rank:].T.copy()


def intersect_kernels(Ms, tol: ToleranceConfig = DEFAULT_TOL):
    """Orthonormal basis of the intersection of the kernels of ``Ms``.

    Implemented by stacking the matrices vertically and taking a single
    nullspace.  Each matrix is normalized by its largest singular value
    first so that the relative rank tolerance treats all kernels alike
    regardless of scale.
    """
    if not Ms:
        raise InvalidInputError("need at least one matrix")
    mats = [as_matrix(M, f"matrix {i}") for i, M in enumerate(Ms)]
    ncols = mats[0].shape[1]
    for i, A in enumerate(mats):
        if A.shape[1] != ncols:
            raise DimensionError(
                f"matrix {i} has {A.shape[1]} columns, expected {ncols}")
    normed = []
    for A in mats:
        smax = np.linalg.svd(A, compute_uv=False)[0]
        normed.append(A / smax if smax > 0 else A)
    return nullspace_basis(np.vstack(normed), tol)


def orth_complement_basis(B, tol: ToleranceConfig = DEFAULT_TOL, ambient=None):
    """Rows form an orthonormal basis of the orthogonal complement of span(B).

    ``B`` holds basis vectors in its columns.  An empty ``B`` (zero
    columns) yields a full orthonormal basis of the ambient space, which
    must then be supplied via ``ambient``.
    """
    Barr = np.asarray(B, dtype=float)
    if Barr.ndim != 2:
        raise DimensionError("basis must be 2-D")
    if Barr.shape[1] == 0:
        dim = ambient if ambient is not None else Barr.shape[0]
        if dim <= 0:
            raise DimensionError("ambient dimension required for empty basis")
        return np.eye(dim)
    A = as_matrix(Barr, "basis")
    U, s, _ = np.linalg.svd(A, full_matrices=True)
    rank = 0
    if s.size and s[0] > 0.0:
        rank = int(np.sum(s > tol.rank_tol * s[0]))
    return U[:, rank:].T.copy()


def kron(A, B):
    """Kronecker product."""
    return np.kron(np.atleast_2d(np.asarray(A, dtype=float)),
                   np.atleast_2d(np.asarray(B, dtype=float)))


def vec(M):
    """Column-major stacking of M's columns into a 1-D vector."""
    return np.asarray(M, dtype=float).flatten(order="F")


def _power_basis(E, n):
    out = [np.eye(n)]
    for _ in range(n - 1):
        out.append(out[-1] @ E)
    return out


def char_poly_coeffs(E, tol: ToleranceConfig = DEFAULT_TOL):
    """Coefficients a with E^n = a[0] I + a[1] E + ... + a[n-1] E^(n-1).

    Faddeev-LeVerrier gives the characteristic-polynomial coefficients
    without eigenvalues; when its reconstruction residual exceeds
    ``residual_tol`` (possible for ill-conditioned E), a least-squares fit
    of vec(E^n) against the vectorized lower powers is used instead, since
    it minimizes exactly the residual being checked.
    """
    A = as_matrix(E, "E")
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionError("E must be square")
    powers = _power_basis(A, n)
    En = powers[-1] @ A
    target = max(1.0, float(np.linalg.norm(En)))

    def residual(a):
        R = En - sum(a[i] * powers[i] for i in range(n))
        return float(np.linalg.norm(R)) / target

    # Faddeev-LeVerrier: p(x) = x^n + c[n-1] x^(n-1) + ... + c[0]
    M = np.zeros_like(A)
    c = np.zeros(n + 1)
    c[n] = 1.0
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + c[n - k + 1] * I
        c[n - k] = -np.trace(A @ M) / k
    a = -c[:n]
    if residual(a) <= tol.residual_tol:
        return a

    Phi = np.column_stack([P.flatten(order="F") for P in powers])
    a_ls, *_ = np.linalg.lstsq(Phi, En.flatten(order="F"), rcond=None)
    if residual(a_ls) <= tol.residual_tol:
        return a_ls
    raise NumericalFailureError(
        "characteristic-coefficient reconstruction residual "
        f"{residual(a_ls):.3e} exceeds tolerance {tol.residual_tol:.1e}",
        diagnostics={"residual": residual(a_ls)},
    )


def spectral_radius(A):
    """Largest absolute eigenvalue."""
    M = as_matrix(A, "A")
    if M.shape[0] != M.shape[1]:
        raise DimensionError("spectral radius needs a square matrix")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def principal_angles(rows_a, rows_b):
    """Principal angles (radians, ascending) between two row spaces."""
    A = as_matrix(rows_a, "rows_a")
    B = as_matrix(rows_b, "rows_b")
    if A.shape[1] != B.shape[1]:
        raise DimensionError("row spaces live in different ambient dimensions")
    qa, _ = np.linalg.qr(A.T)
    qb, _ = np.linalg.qr(B.T)
    qa = qa[:, :min(A.shape)]
    qb = qb[:, :min(B.shape)]
    s = np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), -1.0, 1.0)
    return np.arccos(s)
