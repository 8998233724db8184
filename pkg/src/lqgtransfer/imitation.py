"""Learn the static window-feedback gain from a single expert trajectory."""

from dataclasses import dataclass

import numpy as np

from .datamat import build_pair
from .errors import InconsistentDataError, InsufficientDataError
from .linalg import DEFAULT_TOL, ToleranceConfig, numerical_rank, pseudo_inverse

__all__ = ["LearnedGain", "learn_klqg"]


@dataclass(frozen=True)
class LearnedGain:
    """Gain learned by least squares from windowed expert data.

    ``unique`` is True iff the data matrix had full row rank, in which
    case the gain is the only solution; otherwise it is the minimum-norm
    one (multi-input systems never reach full row rank).
    """

    K: np.ndarray
    residual: float
    unique: bool


def learn_klqg(traj, n: int, tol: ToleranceConfig = DEFAULT_TOL,
               residual_tol: float = 1e-6) -> LearnedGain:
    """Fit K so that u(t+n) = K [U_n(t); Y_n(t+1)] on the whole trajectory.

    Uses every available column (c = span - n + 1); requires span >=
    n(l+2) - 1 so that c >= n(l+1).  Raises InconsistentDataError when no
    static gain of window depth n explains the data to ``residual_tol``.
    """
    l = traj.l
    min_span = n * (l + 2) - 1
    if traj.span < min_span:
        raise InsufficientDataError(
            f"imitation needs span >= {min_span} ({min_span + 1} samples), "
            f"got span {traj.span}", required=min_span + 1)
    c = traj.span - n + 1
    pair = build_pair(traj, n, c)
    K = pair.Ubar @ pseudo_inverse(pair.H, tol)
    residual = float(np.linalg.norm(pair.Ubar - K @ pair.H)
                     / max(1.0, np.linalg.norm(pair.Ubar)))
    if residual > residual_tol:
        raise InconsistentDataError(
            f"no depth-{n} static gain reproduces the data: relative "
            f"residual {residual:.3e} exceeds {residual_tol:.1e}")
    unique = numerical_rank(pair.H, tol) == n * (traj.m + l)
    return LearnedGain(K=K, residual=residual, unique=unique)
