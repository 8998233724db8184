import numpy as np
import pytest

from lqgtransfer import (InsufficientDataError, Trajectory, batch_reactor,
                         build_compensator, build_pair, estimate_dimension,
                         expected_rank, numerical_rank, reactor_target_task,
                         simulate_closed_loop, stack_window, static_lqg_gain)


@pytest.fixture(scope="module")
def reactor_traj():
    sys = batch_reactor()
    comp = build_compensator(sys, reactor_target_task())
    traj = simulate_closed_loop(sys, comp, 60, seed=2024)
    return sys, comp, traj


def test_stack_window_depth_one():
    traj = Trajectory(np.arange(5.0), 10 + np.arange(5.0))
    U, Y = stack_window(traj, 1, 2)
    assert U.tolist() == [2.0]
    assert Y.tolist() == [13.0]


def test_stack_window_constant_trajectory():
    traj = Trajectory(np.full(6, 3.5), np.full(6, -1.25))
    U, Y = stack_window(traj, 4, 0)
    np.testing.assert_allclose(U, 3.5)
    np.testing.assert_allclose(Y, -1.25)


def test_stack_window_out_of_range():
    traj = Trajectory(np.zeros(5), np.zeros(5))
    with pytest.raises(InsufficientDataError):
        stack_window(traj, 3, 2)


def test_build_pair_columns_reconstruct_windows(reactor_traj):
    _, _, traj = reactor_traj
    pair = build_pair(traj, 3, 10, t0=4)
    for j in range(10):
        U, Y = stack_window(traj, 3, 4 + j)
        np.testing.assert_array_equal(pair.H[:3, j], U)
        np.testing.assert_array_equal(pair.H[3:, j], Y)
        np.testing.assert_array_equal(pair.Ubar[:, j], traj.inputs[4 + 3 + j])


def test_build_pair_minimal_span_arithmetic():
    # span n(l+2)-1 = 11 gives exactly c = span - n + 1 = 8 = n(l+1) columns
    n, l = 4, 1
    span = n * (l + 2) - 1
    traj = Trajectory(np.arange(span + 1.0), np.arange(span + 1.0))
    pair = build_pair(traj, n, span - n + 1)
    assert pair.c == n * (l + 1) == 8
    with pytest.raises(InsufficientDataError) as exc:
        build_pair(traj, n, span - n + 2)
    assert exc.value.required == n + span - n + 2


def test_build_pair_single_column():
    traj = Trajectory(np.arange(6.0), np.arange(6.0))
    pair = build_pair(traj, 4, 1)
    assert pair.H.shape == (8, 1)


def test_column_shift_consistency(reactor_traj):
    _, _, traj = reactor_traj
    a = build_pair(traj, 4, 12, t0=0)
    b = build_pair(traj, 4, 12, t0=1)
    np.testing.assert_array_equal(a.H[:, 1:], b.H[:, :-1])


def test_ubar_equals_gain_times_h(reactor_traj):
    _, comp, traj = reactor_traj
    K = static_lqg_gain(comp, 4)
    pair = build_pair(traj, 4, 40)
    assert np.linalg.norm(pair.Ubar - K @ pair.H) <= 1e-9


def test_expected_rank_values():
    assert expected_rank(4, 20, 4, 1, 1) == 8
    assert expected_rank(4, 3, 4, 1, 1) == 3
    assert expected_rank(2, 20, 4, 1, 1) == 4


def test_empirical_rank_law_on_reactor(reactor_traj):
    # stationary-regime windows; rate-based since the transition points
    # c ~ n + l r carry genuinely weak smallest singular values
    from lqgtransfer.linalg import ToleranceConfig

    sys, comp, _ = reactor_traj
    tol = ToleranceConfig(rank_tol=1e-7, residual_tol=1e-7)
    n, m, l = 4, 1, 1
    burn = 60
    passes = 0
    trials = 20
    for sd in range(trials):
        traj = simulate_closed_loop(sys, comp, burn + 26, seed=5000 + sd)
        ok = True
        for r in range(1, n + 3):
            for c in range(1, (m + l) * (n + 2) + 5):
                pair = build_pair(traj, r, c, t0=burn)
                if numerical_rank(pair.H, tol) != expected_rank(r, c, n, m, l):
                    ok = False
        passes += ok
    assert passes >= int(0.95 * trials)


def test_estimate_dimension_reactor(reactor_traj):
    _, _, traj = reactor_traj
    n_est, l_est = estimate_dimension(traj, r_max=8)
    assert (n_est, l_est) == (4, 1)


def test_estimate_dimension_scalar_system():
    from lqgtransfer import LinearSystem, LqgTask

    sys = LinearSystem(A=np.array([[0.6]]), B=np.array([[1.0]]),
                       C=np.array([[1.0]]), W=np.eye(1), V=np.eye(1))
    comp = build_compensator(sys, LqgTask(Q=np.eye(1), R=np.eye(1)))
    traj = simulate_closed_loop(sys, comp, 40, seed=31)
    n_est, l_est = estimate_dimension(traj, r_max=4)
    assert (n_est, l_est) == (1, 1)


def test_estimate_dimension_too_short():
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.standard_normal(6), rng.standard_normal(6))
    with pytest.raises(InsufficientDataError):
        estimate_dimension(traj, r_max=5)
