"""Stochastic LTI plant, closed-loop simulation, and trajectory I/O.

Length convention: a trajectory of *span* T holds T+1 samples u(0..T),
y(0..T).  This matches the windowed-data algebra where a span-T record
yields c = T - n + 1 data-matrix columns.

Noise generation is pinned for reproducibility: ``numpy``'s default
``Generator`` (PCG64) seeded with the given integer, drawing standard
normals in the order v(0), then per step w(t) followed by v(t+1).  The
draws are mapped through symmetric-eigendecomposition square roots of W
and V.  Simulation itself is a deterministic recursion on the pre-drawn
noise (numba-accelerated, see ``_accel``).
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import DimensionError, InvalidInputError
from .linalg import DEFAULT_TOL, ToleranceConfig, as_matrix, numerical_rank

__all__ = [
    "LinearSystem",
    "Trajectory",
    "check_controllable",
    "check_observable",
    "simulate_closed_loop",
    "simulate_static_closed_loop",
    "lqg_cost_estimate",
    "static_lqg_cost_estimate",
    "closed_loop_matrix",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "trajectory_to_json",
    "trajectory_from_json",
]


def _sym_sqrt(M):
    """Symmetric PSD square root; tiny negative eigenvalues clamped to 0."""
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


@dataclass(frozen=True)
class LinearSystem:
    """Plant x(t+1) = A x + B u + w, y = C x + v with w ~ N(0,W), v ~ N(0,V)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        W = as_matrix(self.W, "W")
        V = as_matrix(self.V, "V")
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionError("B/C incompatible with A")
        if W.shape != (n, n) or V.shape != (C.shape[0], C.shape[0]):
            raise DimensionError("noise covariances have wrong shape")
        tol = 1e-8
        if np.linalg.norm(W - W.T) > tol * max(1.0, np.linalg.norm(W)):
            raise InvalidInputError("W must be symmetric")
        if np.linalg.norm(V - V.T) > tol * max(1.0, np.linalg.norm(V)):
            raise InvalidInputError("V must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (W + W.T))) < -tol:
            raise InvalidInputError("W must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(0.5 * (V + V.T))) <= 0.0:
            raise InvalidInputError("V must be positive definite")
        for name, value in (("A", A), ("B", B), ("C", C), ("W", W), ("V", V)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    def validate_structure(self, tol: ToleranceConfig = DEFAULT_TOL) -> None:
        """Check controllability of (A,B) and (A, W^(1/2)), observability of (A,C)."""
        if not check_controllable(self.A, self.B, tol):
            raise InvalidInputError("(A, B) is not controllable")
        if not check_controllable(self.A, _sym_sqrt(self.W), tol):
            raise InvalidInputError("(A, W^(1/2)) is not controllable")
        if not check_observable(self.A, self.C, tol):
            raise InvalidInputError("(A, C) is not observable")


@dataclass
class Trajectory:
    """Recorded input/output samples u(t), y(t) for t = start_time .. start_time+span."""

    inputs: np.ndarray
    outputs: np.ndarray
    start_time: int = 0
    seed: int | None = None
    task_label: str | None = None

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.ndim != 2 or y.ndim != 2:
            raise DimensionError("inputs/outputs must be 1-D or 2-D arrays")
        if u.shape[0] != y.shape[0]:
            raise DimensionError("input and output sequences differ in length")
        if u.shape[0] < 1:
            raise InvalidInputError("trajectory must hold at least one sample")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise InvalidInputError("trajectory contains non-finite entries")
        if self.start_time < 0:
            raise InvalidInputError("start_time must be nonnegative")
        self.inputs = u
        self.outputs = y

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def span(self) -> int:
        """T such that samples cover t = start_time .. start_time + T."""
        return self.n_samples - 1

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def l(self) -> int:
        return self.outputs.shape[1]


def check_controllable(A, B, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff rank [B, AB, ..., A^(n-1)B] = n at the given tolerance."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape[1] != n or B.shape[0] != n:
        raise DimensionError("A must be square and B must have n rows")
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return numerical_rank(np.hstack(blocks), tol) == n


def check_observable(A, C, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff rank [C; CA; ...; CA^(n-1)] = n at the given tolerance."""
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    return check_controllable(A.T, C.T, tol)


def _draw_noise(sys: LinearSystem, T: int, seed: int):
    """Pre-draw the noise sequences (fixed order: v(0), then w(t), v(t+1))."""
    rng = np.random.default_rng(seed)
    n, l = sys.n, sys.l
    g = rng.standard_normal(l + T * (n + l))
    Ws = _sym_sqrt(sys.W)
    Vs = _sym_sqrt(sys.V)
    v = np.empty((T + 1, l))
    w = np.empty((T, n))
    v[0] = Vs @ g[:l]
    off = l
    for t in range(T):
        w[t] = Ws @ g[off:off + n]
        v[t + 1] = Vs @ g[off + n:off + n + l]
        off += n + l
    return w, v


def _check_comp_dims(sys: LinearSystem, comp) -> None:
    n, m, l = sys.n, sys.m, sys.l
    if comp.E.shape != (n, n) or comp.F.shape != (n, m) \
            or comp.G.shape != (n, l) or comp.Hgain.shape != (m, n):
        raise DimensionError("compensator dimensions do not match the system")


def simulate_closed_loop(sys: LinearSystem, comp, T: int, seed: int,
                         x0=None, xhat0=None) -> Trajectory:
    """Simulate the plant under a dynamic compensator for span T.

    Steps: u(t) = Hgain xh(t); x(t+1) = A x + B u + w(t);
    y(t+1) = C x(t+1) + v(t+1); xh(t+1) = E xh + F u + G y(t+1), with
    y(0) = C x0 + v(0).  Deterministic given ``seed``; defaults
    x0 = xhat0 = 0.
    """
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    _check_comp_dims(sys, comp)
    n = sys.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    xh0 = np.zeros(n) if xhat0 is None else np.asarray(xhat0, dtype=float).reshape(n)
    w, v = _draw_noise(sys, T, seed)
    us, ys, _ = _accel.closed_loop_sim(
        np.ascontiguousarray(sys.A), np.ascontiguousarray(sys.B),
        np.ascontiguousarray(sys.C), np.ascontiguousarray(comp.E),
        np.ascontiguousarray(comp.F), np.ascontiguousarray(comp.G),
        np.ascontiguousarray(comp.Hgain), x0, xh0, w, v)
    return Trajectory(us, ys, start_time=0, seed=seed)


def simulate_static_closed_loop(sys: LinearSystem, K, n: int, T: int, seed: int,
                                x0=None) -> Trajectory:
    """Simulate the plant under the static window-feedback law.

    u(t) = K [U_n(t-n); Y_n(t-n+1)] once a full window exists (t >= n);
    the first n inputs are zero.  Same noise convention as
    :func:`simulate_closed_loop`.
    """
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    K = as_matrix(K, "K")
    if K.shape != (sys.m, n * (sys.m + sys.l)):
        raise DimensionError(
            f"K must be {sys.m} x {n * (sys.m + sys.l)}, got {K.shape}")
    x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).reshape(sys.n)
    w, v = _draw_noise(sys, T, seed)
    us, ys, _ = _accel.static_loop_sim(
        np.ascontiguousarray(sys.A), np.ascontiguousarray(sys.B),
        np.ascontiguousarray(sys.C), np.ascontiguousarray(K), n, x0, w, v)
    return Trajectory(us, ys, start_time=0, seed=seed)


def lqg_cost_estimate(sys: LinearSystem, comp, task, T: int, seeds) -> float:
    """Monte-Carlo estimate of the average quadratic cost under a compensator.

    Average over seeds of (1/T) sum_{t=0}^{T-1} x'Qx + u'Ru using the
    internally simulated state sequence.
    """
    seeds = list(seeds)
    if T < 1 or not seeds:
        raise InvalidInputError("T >= 1 and at least one seed required")
    _check_comp_dims(sys, comp)
    Q = as_matrix(task.Q, "Q")
    R = as_matrix(task.R, "R")
    total = 0.0
    for seed in seeds:
        w, v = _draw_noise(sys, T, int(seed))
        us, _, xs = _accel.closed_loop_sim(
            np.ascontiguousarray(sys.A), np.ascontiguousarray(sys.B),
            np.ascontiguousarray(sys.C), np.ascontiguousarray(comp.E),
            np.ascontiguousarray(comp.F), np.ascontiguousarray(comp.G),
            np.ascontiguousarray(comp.Hgain), np.zeros(sys.n), np.zeros(sys.n),
            w, v)
        acc = 0.0
        for t in range(T):
            acc += xs[t] @ Q @ xs[t] + us[t] @ R @ us[t]
        total += acc / T
    return total / len(seeds)


def static_lqg_cost_estimate(sys: LinearSystem, K, n: int, task, T: int, seeds) -> float:
    """Monte-Carlo cost of the static window-feedback controller."""
    seeds = list(seeds)
    if T < 1 or not seeds:
        raise InvalidInputError("T >= 1 and at least one seed required")
    K = as_matrix(K, "K")
    Q = as_matrix(task.Q, "Q")
    R = as_matrix(task.R, "R")
    total = 0.0
    for seed in seeds:
        w, v = _draw_noise(sys, T, int(seed))
        us, _, xs = _accel.static_loop_sim(
            np.ascontiguousarray(sys.A), np.ascontiguousarray(sys.B),
            np.ascontiguousarray(sys.C), np.ascontiguousarray(K), n,
            np.zeros(sys.n), w, v)
        acc = 0.0
        for t in range(T):
            acc += xs[t] @ Q @ xs[t] + us[t] @ R @ us[t]
        total += acc / T
    return total / len(seeds)


def closed_loop_matrix(sys: LinearSystem, comp):
    """State matrix of the (x, xh) closed loop; stable iff spectral radius < 1."""
    _check_comp_dims(sys, comp)
    A, B, C = sys.A, sys.B, sys.C
    E, F, G, Hg = comp.E, comp.F, comp.G, comp.Hgain
    top = np.hstack([A, B @ Hg])
    bottom = np.hstack([G @ C @ A, E + F @ Hg + G @ C @ B @ Hg])
    return np.vstack([top, bottom])


# -- serialization ----------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV with header t,u_1..u_m,y_1..y_l; 17-significant-digit decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (["t"] + [f"u_{i+1}" for i in range(traj.m)]
              + [f"y_{i+1}" for i in range(traj.l)])
    writer.writerow(header)
    for k in range(traj.n_samples):
        row = [str(traj.start_time + k)]
        row += [_fmt(x) for x in traj.inputs[k]]
        row += [_fmt(x) for x in traj.outputs[k]]
        writer.writerow(row)
    return buf.getvalue()


def trajectory_from_csv(text: str) -> Trajectory:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    m = sum(1 for h in header if h.startswith("u_"))
    l = sum(1 for h in header if h.startswith("y_"))
    if header[0] != "t" or m == 0 or l == 0 or len(header) != 1 + m + l:
        raise InvalidInputError("malformed trajectory CSV header")
    times, us, ys = [], [], []
    for row in reader:
        if not row:
            continue
        times.append(int(row[0]))
        us.append([float(x) for x in row[1:1 + m]])
        ys.append([float(x) for x in row[1 + m:1 + m + l]])
    if not times:
        raise InvalidInputError("trajectory CSV holds no samples")
    return Trajectory(np.array(us), np.array(ys), start_time=times[0])


def trajectory_to_json(traj: Trajectory) -> str:
    """JSON envelope {m, l, T, start_time, seed, task_label, data}."""
    data = [[traj.start_time + k] + [float(x) for x in traj.inputs[k]]
            + [float(x) for x in traj.outputs[k]]
            for k in range(traj.n_samples)]
    env = {
        "m": traj.m,
        "l": traj.l,
        "T": traj.span,
        "start_time": traj.start_time,
        "seed": traj.seed,
        "task_label": traj.task_label,
        "data": data,
    }
    return json.dumps(env)


def trajectory_from_json(text: str) -> Trajectory:
    env = json.loads(text)
    m, l = int(env["m"]), int(env["l"])
    rows = env["data"]
    us = np.array([r[1:1 + m] for r in rows], dtype=float)
    ys = np.array([r[1 + m:1 + m + l] for r in rows], dtype=float)
    traj = Trajectory(us, ys, start_time=int(env["start_time"]),
                      seed=env.get("seed"), task_label=env.get("task_label"))
    if traj.span != int(env["T"]):
        raise InvalidInputError("JSON envelope span disagrees with data rows")
    return traj
