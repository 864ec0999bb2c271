import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dprl.counts import CountTables, update_with_trajectory
from dprl.mdp import Trajectory, build_riverswim, sample_episode


def _traj(states, actions, rewards):
    return Trajectory(np.array(states), np.array(actions), np.array(rewards, dtype=float))


def test_single_trajectory_increments():
    counts = CountTables(H=2, S=3, A=2)
    update_with_trajectory(counts, _traj([0, 1, 2], [1, 0], [0.5, 1.0]))
    assert counts.N_sa[0, 0, 1] == 1 and counts.N_sa[1, 1, 0] == 1
    assert counts.N_sa.sum() == 2
    assert counts.N_sas[0, 0, 1, 1] == 1 and counts.N_sas[1, 1, 0, 2] == 1
    assert counts.R_sa[0, 0, 1] == 0.5 and counts.R_sa[1, 1, 0] == 1.0
    counts.check_invariants()


def test_repeated_trajectory_doubles():
    counts = CountTables(H=2, S=3, A=2)
    traj = _traj([0, 0, 0], [0, 0], [1.0, 0.0])
    counts.update(traj).update(traj)
    assert counts.N_sa[0, 0, 0] == 2 and counts.N_sa[1, 0, 0] == 2
    assert counts.N_sas[0, 0, 0, 0] == 2
    assert counts.R_sa[0, 0, 0] == 2.0
    assert counts.episodes_seen == 2


def test_bad_trajectories_rejected():
    counts = CountTables(H=2, S=3, A=2)
    with pytest.raises(IndexError):
        counts.update(_traj([0, 1, 3], [0, 0], [0, 0]))
    with pytest.raises(IndexError):
        counts.update(_traj([0, 1, 2], [0, 2], [0, 0]))
    with pytest.raises(IndexError):
        counts.update(_traj([0, 1], [0], [0]))


def test_random_trajectories_match_recount():
    mdp = build_riverswim(5, 6)
    rng = np.random.default_rng(11)
    counts = CountTables(6, 5, 2)
    # independent recount with explicit loops
    N_sa = np.zeros((6, 5, 2), dtype=int)
    N_sas = np.zeros((6, 5, 2, 5), dtype=int)
    R = np.zeros((6, 5, 2))
    for _ in range(1000):
        policy = rng.integers(0, 2, size=(6, 5))
        traj = sample_episode(mdp, policy, rng)
        counts.update(traj)
        for h in range(6):
            s, a, s2 = traj.states[h], traj.actions[h], traj.states[h + 1]
            N_sa[h, s, a] += 1
            N_sas[h, s, a, s2] += 1
            R[h, s, a] += traj.rewards[h]
    np.testing.assert_array_equal(counts.N_sa, N_sa)
    np.testing.assert_array_equal(counts.N_sas, N_sas)
    np.testing.assert_allclose(counts.R_sa, R, atol=1e-12)
    counts.check_invariants()


def test_json_round_trip():
    mdp = build_riverswim(3, 4)
    rng = np.random.default_rng(0)
    counts = CountTables(4, 3, 2)
    for _ in range(20):
        counts.update(sample_episode(mdp, rng.integers(0, 2, size=(4, 3)), rng))
    back = CountTables.from_json(counts.to_json())
    np.testing.assert_array_equal(back.N_sas, counts.N_sas)
    np.testing.assert_array_equal(back.R_sa, counts.R_sa)
    assert back.episodes_seen == 20


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), episodes=st.integers(0, 30))
def test_invariants_hold_for_any_sequence(seed, episodes):
    rng = np.random.default_rng(seed)
    H, S, A = 3, 4, 3
    counts = CountTables(H, S, A)
    for _ in range(episodes):
        states = rng.integers(0, S, size=H + 1)
        counts.update(_traj(states, rng.integers(0, A, size=H), rng.random(H)))
    counts.check_invariants()
    assert np.all(counts.N_sa.sum(axis=(1, 2)) == episodes)
