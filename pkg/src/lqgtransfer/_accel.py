"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The time-stepping simulation loops and the Riccati fixed-point iteration
dominate runtime in Monte-Carlo experiments.  Both are sequential
recursions that numpy cannot vectorize, so they carry ``numba.njit``
versions.  Selection:

* ``LQGTRANSFER_NO_NUMBA=1`` (any non-empty value) forces the pure-numpy
  path;
* otherwise numba is used when importable, falling back silently to
  numpy.

Noise is always drawn OUTSIDE the kernels (numpy ``Generator``), so both
paths consume identical pre-generated noise arrays and agree to floating
point roundoff.  ``NUMBA_ENABLED`` reports which path is active;
``benchmarks/bench_kernels.py`` times one against the other.
"""

import os

import numpy as np

NUMBA_ENABLED = False
_DISABLED_BY_ENV = bool(os.environ.get("LQGTRANSFER_NO_NUMBA", ""))

if not _DISABLED_BY_ENV:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def closed_loop_sim_np(A, B, C, E, F, G, Hg, x0, xh0, w_seq, v_seq):
    """Closed-loop recursion under a dynamic output-feedback compensator.

    Per step t: u(t) = Hg xh(t); x(t+1) = A x(t) + B u(t) + w(t);
    y(t+1) = C x(t+1) + v(t+1); xh(t+1) = E xh(t) + F u(t) + G y(t+1).
    y(0) = C x0 + v(0).  Returns (u, y, x) with T+1 rows each, where
    T = w_seq.shape[0].
    """
    T = w_seq.shape[0]
    n = A.shape[0]
    m = B.shape[1]
    l = C.shape[0]
    us = np.zeros((T + 1, m))
    ys = np.zeros((T + 1, l))
    xs = np.zeros((T + 1, n))
    x = x0.copy()
    xh = xh0.copy()
    ys[0] = np.dot(C, x) + v_seq[0]
    xs[0] = x
    for t in range(T):
        u = np.dot(Hg, xh)
        us[t] = u
        x = np.dot(A, x) + np.dot(B, u) + w_seq[t]
        y = np.dot(C, x) + v_seq[t + 1]
        xs[t + 1] = x
        ys[t + 1] = y
        xh = np.dot(E, xh) + np.dot(F, u) + np.dot(G, y)
    us[T] = np.dot(Hg, xh)
    return us, ys, xs


def static_loop_sim_np(A, B, C, K, n, x0, w_seq, v_seq):
    """Closed-loop recursion under the static window-feedback law.

    u(t) = K [u(t-n); ...; u(t-1); y(t-n+1); ...; y(t)] for t >= n,
    u(t) = 0 for t < n.  Same plant stepping and output convention as
    ``closed_loop_sim_np``.
    """
    T = w_seq.shape[0]
    nx = A.shape[0]
    m = B.shape[1]
    l = C.shape[0]
    us = np.zeros((T + 1, m))
    ys = np.zeros((T + 1, l))
    xs = np.zeros((T + 1, nx))
    z = np.zeros(n * (m + l))
    x = x0.copy()
    ys[0] = np.dot(C, x) + v_seq[0]
    xs[0] = x
    for t in range(T):
        if t >= n:
            for j in range(n):
                for k in range(m):
                    z[j * m + k] = us[t - n + j, k]
            for j in range(n):
                for k in range(l):
                    z[n * m + j * l + k] = ys[t - n + 1 + j, k]
            u = np.dot(K, z)
        else:
            u = np.zeros(m)
        us[t] = u
        x = np.dot(A, x) + np.dot(B, u) + w_seq[t]
        xs[t + 1] = x
        ys[t + 1] = np.dot(C, x) + v_seq[t + 1]
    if T >= n:
        for j in range(n):
            for k in range(m):
                z[j * m + k] = us[T - n + j, k]
        for j in range(n):
            for k in range(l):
                z[n * m + j * l + k] = ys[T - n + 1 + j, k]
        us[T] = np.dot(K, z)
    return us, ys, xs


def dare_iterate_np(A, B, Q, R, tol, max_iter):
    """Fixed-point iteration of the Riccati recursion starting at P = Q.

    Returns (P, iterations, converged, last relative update).
    """
    At = np.ascontiguousarray(A.T)
    Bt = np.ascontiguousarray(B.T)
    P = Q.copy()
    rel = np.inf
    for it in range(max_iter):
        BtP = np.dot(Bt, P)
        Sm = R + np.dot(BtP, B)
        Kg = np.linalg.solve(Sm, np.dot(BtP, A))
        PA = np.dot(P, A)
        Pn = np.dot(At, PA) - np.dot(np.ascontiguousarray(np.dot(BtP, A).T), Kg) + Q
        Pn = 0.5 * (Pn + Pn.T)
        diff = Pn - P
        num = np.sqrt(np.sum(diff * diff))
        den = np.sqrt(np.sum(Pn * Pn))
        if den < 1.0:
            den = 1.0
        rel = num / den
        P = Pn
        if rel <= tol:
            return P, it + 1, True, rel
    return P, max_iter, False, rel


if NUMBA_ENABLED:
    _sig_kwargs = dict(cache=True, fastmath=False)
    closed_loop_sim_nb = njit(**_sig_kwargs)(closed_loop_sim_np)
    static_loop_sim_nb = njit(**_sig_kwargs)(static_loop_sim_np)
    dare_iterate_nb = njit(**_sig_kwargs)(dare_iterate_np)

    def _warmup():
        one = np.eye(1)
        z1 = np.zeros(1)
        w = np.zeros((2, 1))
        closed_loop_sim_nb(one, one, one, one, one, one, one, z1, z1, w, np.zeros((3, 1)))
        static_loop_sim_nb(one, one, one, np.zeros((1, 2)), 1, z1, w, np.zeros((3, 1)))
        dare_iterate_nb(0.5 * one, one, one, one, 1e-12, 1000)

    try:
        _warmup()
        closed_loop_sim = closed_loop_sim_nb
        static_loop_sim = static_loop_sim_nb
        dare_iterate = dare_iterate_nb
    except Exception:  # pragma: no cover - numba present but unusable
        NUMBA_ENABLED = False
        closed_loop_sim = closed_loop_sim_np
        static_loop_sim = static_loop_sim_np
        dare_iterate = dare_iterate_np
else:
    closed_loop_sim = closed_loop_sim_np
    static_loop_sim = static_loop_sim_np
    dare_iterate = dare_iterate_np
