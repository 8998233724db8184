import numpy as np
import pytest

from lqgtransfer import (InconsistentDataError, InsufficientDataError,
                         Trajectory, batch_reactor, batch_reactor_two_input,
                         build_compensator, build_pair, expert_trajectory,
                         learn_klqg, reactor_target_task,
                         simulate_static_closed_loop, static_lqg_gain)


@pytest.fixture(scope="module")
def reactor():
    sys = batch_reactor()
    task = reactor_target_task()
    comp = build_compensator(sys, task)
    return sys, task, comp, static_lqg_gain(comp, 4)


def test_learn_from_minimal_span_matches_model(reactor):
    sys, task, comp, K_model = reactor
    traj = expert_trajectory(sys, task, span=11, seed=101)
    learned = learn_klqg(traj, n=4)
    rel = np.linalg.norm(learned.K - K_model) / np.linalg.norm(K_model)
    assert rel <= 1e-6
    assert learned.unique
    assert learned.residual <= 1e-9


def test_learn_success_rate_over_seeds(reactor):
    sys, task, comp, K_model = reactor
    hits = 0
    for seed in range(50):
        traj = expert_trajectory(sys, task, span=11, seed=7000 + seed)
        learned = learn_klqg(traj, n=4)
        rel = np.linalg.norm(learned.K - K_model) / np.linalg.norm(K_model)
        hits += (rel <= 1e-6 and learned.unique)
    assert hits >= 48  # >= 95% of 50 seeds


def test_one_sample_short_raises(reactor):
    sys, task, _, _ = reactor
    traj = expert_trajectory(sys, task, span=10, seed=5)
    with pytest.raises(InsufficientDataError) as exc:
        learn_klqg(traj, n=4)
    assert exc.value.required == 12


def test_known_static_gain_recovered(reactor):
    sys, _, _, K_model = reactor
    traj = simulate_static_closed_loop(sys, K_model, n=4, T=30, seed=77)
    learned = learn_klqg(traj, n=4)
    assert learned.unique
    rel = np.linalg.norm(learned.K - K_model) / np.linalg.norm(K_model)
    assert rel <= 1e-8


def test_two_input_not_unique_but_consistent():
    sys = batch_reactor_two_input()
    task = reactor_target_task(m=2)
    traj = expert_trajectory(sys, task, span=11, seed=55)
    learned = learn_klqg(traj, n=4)
    assert not learned.unique
    assert learned.residual <= 1e-9
    pair = build_pair(traj, 4, traj.span - 4 + 1)
    assert np.linalg.norm(pair.Ubar - learned.K @ pair.H) <= 1e-9


def test_inconsistent_data_rejected():
    rng = np.random.default_rng(3)
    traj = Trajectory(rng.standard_normal(20), rng.standard_normal(20))
    with pytest.raises(InconsistentDataError):
        learn_klqg(traj, n=4)
