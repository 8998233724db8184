import numpy as np
import pytest

from lqgtransfer import (AssumptionViolationError, Compensator, LinearSystem,
                         LqgTask, batch_reactor, batch_reactor_two_input,
                         block_matrices, build_compensator, build_pair,
                         check_assumption1, kalman_gain, kron, lqr_gain,
                         reactor_target_task, separation_decomposition,
                         simulate_closed_loop, solve_dare,
                         spectral_radius, static_gain_row_lemma2,
                         static_lqg_gain, static_lqg_gain_rowspace)
from lqgtransfer.errors import NumericalFailureError


def bisect_scalar_dare(a, b, q, r, lo=0.0, hi=1e6, iters=200):
    """Independent oracle: bisection on the scalar fixed-point equation
    p = a^2 p - a^2 b^2 p^2/(r + b^2 p) + q (g is decreasing in p)."""
    def g(p):
        return a * a * p - (a * b * p) ** 2 / (r + b * b * p) + q - p

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def reactor():
    sys = batch_reactor()
    task = reactor_target_task()
    return sys, task, build_compensator(sys, task)


def test_dare_zero_dynamics_fixed_point():
    Q = np.diag([1.0, 3.0])
    P = solve_dare(np.zeros((2, 2)), np.eye(2), Q, np.eye(2))
    np.testing.assert_allclose(P, Q, atol=1e-10)


def test_dare_scalar_against_bisection_oracle():
    p_oracle = bisect_scalar_dare(0.5, 1.0, 1.0, 1.0)
    P = solve_dare(np.array([[0.5]]), np.array([[1.0]]),
                   np.array([[1.0]]), np.array([[1.0]]))
    assert P[0, 0] == pytest.approx(p_oracle, abs=1e-10)
    # frozen from the oracle (root of p^2 - 0.25 p - 1 = 0)
    assert p_oracle == pytest.approx(1.1327822185373186, abs=1e-12)


def test_dare_reactor_plugback_residual(reactor):
    sys, task, _ = reactor
    P = solve_dare(sys.A, sys.B, task.Q, task.R)
    S = task.R + sys.B.T @ P @ sys.B
    back = sys.A.T @ P @ sys.A \
        - sys.A.T @ P @ sys.B @ np.linalg.solve(S, sys.B.T @ P @ sys.A) + task.Q
    assert np.linalg.norm(back - P) <= 1e-10 * np.linalg.norm(P)
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(P)) >= -1e-10


def test_dare_nonconvergence_reports_diag():
    with pytest.raises(NumericalFailureError) as exc:
        solve_dare(np.array([[0.5]]), np.array([[1.0]]),
                   np.array([[1.0]]), np.array([[1.0]]), tol=1e-30, max_iter=5)
    assert "iterations" in exc.value.diagnostics


def test_lqr_gain_scalar_value_and_sign():
    sys = LinearSystem(A=np.array([[0.5]]), B=np.array([[1.0]]),
                       C=np.array([[1.0]]), W=np.eye(1), V=np.eye(1))
    task = LqgTask(Q=np.eye(1), R=np.eye(1))
    k = lqr_gain(sys, task)[0, 0]
    p = bisect_scalar_dare(0.5, 1.0, 1.0, 1.0)
    assert k == pytest.approx(-0.5 * p / (1.0 + p), abs=1e-10)
    assert abs(0.5 + k) < 1.0


def test_lqr_reactor_stabilizes(reactor):
    sys, task, comp = reactor
    assert spectral_radius(sys.A + sys.B @ comp.Hgain) < 1.0


def test_kalman_perfect_measurement_limit():
    sys = LinearSystem(A=0.3 * np.eye(2) + 0.05, B=np.eye(2), C=np.eye(2),
                       W=np.eye(2), V=1e-8 * np.eye(2))
    Lf = kalman_gain(sys)
    assert np.linalg.norm(Lf - np.eye(2)) <= 1e-3


def test_kalman_scalar_value():
    sys = LinearSystem(A=np.array([[0.5]]), B=np.array([[1.0]]),
                       C=np.array([[1.0]]), W=np.eye(1), V=np.eye(1))
    lf = kalman_gain(sys)[0, 0]
    sig = bisect_scalar_dare(0.5, 1.0, 1.0, 1.0)
    assert lf == pytest.approx(sig / (sig + 1.0), abs=1e-10)


def test_kalman_reactor_filter_stable(reactor):
    sys, _, comp = reactor
    assert spectral_radius(comp.E) < 1.0


def test_build_compensator_structure(reactor):
    sys, task, comp = reactor
    Lf = kalman_gain(sys)
    I = np.eye(4)
    np.testing.assert_allclose(comp.E, (I - Lf @ sys.C) @ sys.A, atol=1e-12)
    np.testing.assert_allclose(comp.F, (I - Lf @ sys.C) @ sys.B, atol=1e-12)
    np.testing.assert_allclose(comp.G, Lf, atol=1e-12)
    # degenerate filter: zero gain collapses E, F to the plant matrices
    degenerate = Compensator(E=sys.A, F=sys.B, G=np.zeros((4, 1)),
                             Hgain=comp.Hgain)
    np.testing.assert_allclose(degenerate.E, sys.A)


def test_assumption1_reactor_variants(reactor):
    sys, task, comp = reactor
    assert check_assumption1(comp)
    sys2 = batch_reactor_two_input()
    comp2 = build_compensator(sys2, reactor_target_task(m=2))
    assert check_assumption1(comp2)
    idle = Compensator(E=comp.E, F=comp.F, G=comp.G, Hgain=np.zeros((1, 4)))
    assert not check_assumption1(idle)


def test_block_matrices_single_depth():
    comp = Compensator(E=np.array([[0.5]]), F=np.array([[2.0]]),
                       G=np.array([[3.0]]), Hgain=np.array([[1.5]]))
    blocks = block_matrices(comp, 1)
    np.testing.assert_allclose(blocks.F_x, [[1.5]])
    np.testing.assert_allclose(blocks.F_u, [[2.0]])
    np.testing.assert_allclose(blocks.M_u, [[0.0]])
    np.testing.assert_allclose(blocks.Mtil_u, [[0.0]])


def test_block_matrices_mtil_identity():
    rng = np.random.default_rng(8)
    for _ in range(5):
        n, m, l = 3, 2, 2
        E = rng.standard_normal((n, n)) * 0.4
        comp = Compensator(E=E, F=rng.standard_normal((n, m)),
                           G=rng.standard_normal((n, l)),
                           Hgain=rng.standard_normal((m, n)))
        blocks = block_matrices(comp, n)
        Hdiag = np.kron(np.eye(n), comp.Hgain)
        np.testing.assert_allclose(blocks.M_u, Hdiag @ blocks.Mtil_u, atol=1e-12)
        np.testing.assert_allclose(blocks.M_y, Hdiag @ blocks.Mtil_y, atol=1e-12)
        assert np.linalg.norm(np.triu(blocks.M_u)) == 0.0


def test_block_matrices_fx_invertible(reactor):
    _, _, comp = reactor
    blocks = block_matrices(comp, 4)
    assert blocks.F_x.shape == (4, 4)
    assert abs(np.linalg.det(blocks.F_x)) > 1e-12


def test_static_gain_reproduces_inputs_on_trajectory(reactor):
    sys, task, comp = reactor
    K = static_lqg_gain(comp, 4)
    traj = simulate_closed_loop(sys, comp, 60, seed=21)
    pair = build_pair(traj, 4, 50)
    resid = np.linalg.norm(pair.Ubar - K @ pair.H)
    assert resid <= 1e-9


def test_static_gain_scalar_system_elimination():
    # n = 1: eliminate xh directly from the recursion:
    # u(t+1) = Hg xh(t+1) = Hg(E xh + F u + G y(t+1))
    #        = E u(t) + Hg F u(t) + Hg G y(t+1)   [since Hg xh = u, scalar]
    E, F, G, Hg = 0.5, 2.0, 3.0, 1.5
    comp = Compensator(E=[[E]], F=[[F]], G=[[G]], Hgain=[[Hg]])
    K = static_lqg_gain(comp, 1)
    np.testing.assert_allclose(K, [[E + Hg * F, Hg * G]], atol=1e-12)


def test_assumption_violation_raises():
    comp = Compensator(E=0.5 * np.eye(2), F=np.ones((2, 1)),
                       G=np.ones((2, 1)), Hgain=np.zeros((1, 2)))
    with pytest.raises(AssumptionViolationError):
        static_lqg_gain(comp, 2)


def _random_compensator(rng, n, m, l):
    E = rng.standard_normal((n, n))
    E *= rng.uniform(0.3, 0.9) / max(abs(np.linalg.eigvals(E)))
    return Compensator(E=E, F=rng.standard_normal((n, m)),
                       G=rng.standard_normal((n, l)),
                       Hgain=rng.standard_normal((m, n)))


def test_separation_identity_random_ensemble():
    rng = np.random.default_rng(99)
    count = 0
    while count < 100:
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 3))
        l = int(rng.integers(1, 3))
        comp = _random_compensator(rng, n, m, l)
        if not check_assumption1(comp):
            continue
        count += 1
        sep = separation_decomposition(comp, n)
        K_row = static_lqg_gain_rowspace(comp, n)
        rel = np.linalg.norm(sep.K @ sep.L_est - K_row) / np.linalg.norm(K_row)
        assert rel <= 1e-8
        assert np.linalg.matrix_rank(sep.L_est, tol=1e-9 * np.linalg.norm(sep.L_est, 2)) == n + m
        if m == 1:
            K_blk = static_lqg_gain(comp, n)
            rel2 = np.linalg.norm(sep.K @ sep.L_est - K_blk) / np.linalg.norm(K_blk)
            assert rel2 <= 1e-8


def test_separation_bottom_rows_structure(reactor):
    _, _, comp = reactor
    sep = separation_decomposition(comp, 4)
    bottom = sep.L_est[-1:]
    expect = np.hstack([kron(sep.a.reshape(1, -1), np.eye(1)), np.zeros((1, 4))])
    np.testing.assert_allclose(bottom, expect, atol=1e-12)


def test_target_gain_in_estimator_row_space(reactor):
    _, _, comp = reactor
    sep = separation_decomposition(comp, 4)
    K = static_lqg_gain(comp, 4)
    P = np.linalg.pinv(sep.L_est) @ sep.L_est
    assert np.linalg.norm(K @ (np.eye(8) - P)) <= 1e-8 * np.linalg.norm(K)


def test_lemma2_rows_match_block_gain():
    rng = np.random.default_rng(123)
    checked = 0
    while checked < 20:
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 3))
        l = int(rng.integers(1, 3))
        comp = _random_compensator(rng, n, m, l)
        if not check_assumption1(comp):
            continue
        checked += 1
        K_blk = static_lqg_gain(comp, n)
        for i in range(m):
            row = static_gain_row_lemma2(comp, n, i)
            rel = np.linalg.norm(row - K_blk[i:i + 1]) / np.linalg.norm(K_blk[i:i + 1])
            assert rel <= 1e-8


def test_lemma2_two_input_reactor_rows():
    sys2 = batch_reactor_two_input()
    comp2 = build_compensator(sys2, reactor_target_task(m=2))
    K_blk = static_lqg_gain(comp2, 4)
    for i in range(2):
        row = static_gain_row_lemma2(comp2, 4, i)
        assert np.linalg.norm(row - K_blk[i:i + 1]) <= 1e-8 * np.linalg.norm(K_blk[i:i + 1])


def test_single_input_collapse_of_lemma2(reactor):
    _, _, comp = reactor
    row_sel = static_gain_row_lemma2(comp, 4, 0, selection=True)
    row_gen = static_gain_row_lemma2(comp, 4, 0, selection=False)
    np.testing.assert_allclose(row_sel, row_gen, atol=1e-10)


def test_riccati_scaling_invariance(reactor):
    sys, task, _ = reactor
    K1 = lqr_gain(sys, task)
    K2 = lqr_gain(sys, LqgTask(Q=7.0 * task.Q, R=7.0 * task.R))
    assert np.linalg.norm(K1 - K2) <= 1e-8 * np.linalg.norm(K1)


def test_multi_input_flavors_agree_on_window_data():
    sys2 = batch_reactor_two_input()
    comp2 = build_compensator(sys2, reactor_target_task(m=2))
    K_blk = static_lqg_gain(comp2, 4)
    K_row = static_lqg_gain_rowspace(comp2, 4)
    traj = simulate_closed_loop(sys2, comp2, 60, seed=17)
    pair = build_pair(traj, 4, 50)
    for K in (K_blk, K_row):
        assert np.linalg.norm(pair.Ubar - K @ pair.H) <= 1e-9
    # the two representatives genuinely differ as matrices when m > 1
    assert np.linalg.norm(K_blk - K_row) > 1e-3 * np.linalg.norm(K_blk)
