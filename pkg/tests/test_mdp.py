import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dprl.mdp import (
    LEFT,
    RIGHT,
    MdpError,
    RewardKind,
    RiverSwimParams,
    TabularMdp,
    build_riverswim,
    exact_value_iteration,
    load_mdp,
    mdp_from_json,
    policy_evaluation,
    random_mdp,
    sample_episode,
    state_occupancy,
)

from conftest import chain_mdp, enumerate_policies, rollout_value


def test_riverswim_default_shape():
    mdp = build_riverswim(6, 20)
    assert (mdp.S, mdp.A, mdp.H) == (6, 2, 20)
    np.testing.assert_allclose(mdp.P.sum(axis=-1), 1.0, atol=1e-12)
    assert mdp.P.min() >= 0


def test_riverswim_left_is_deterministic():
    mdp = build_riverswim(2, 3)
    assert mdp.P[0, 1, LEFT, 0] == 1.0
    assert mdp.P[0, 0, LEFT, 0] == 1.0


def test_riverswim_rows_and_rewards():
    mdp = build_riverswim(6, 5)
    assert mdp.P[2, 2, RIGHT].sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(mdp.P[0, 2, RIGHT, [1, 2, 3]], [0.1, 0.6, 0.3])
    np.testing.assert_allclose(mdp.P[0, 0, RIGHT, [0, 1]], [0.7, 0.3])
    np.testing.assert_allclose(mdp.P[0, 5, RIGHT, [4, 5]], [0.1, 0.9])
    assert mdp.r_mean[0, 0, LEFT] == 0.05
    assert mdp.r_mean[0, 5, RIGHT] == 1.0
    assert mdp.r_mean.sum() == pytest.approx(5 * 1.05)


def test_riverswim_rejects_bad_probabilities():
    with pytest.raises(MdpError):
        build_riverswim(6, 5, RiverSwimParams(right_advance=0.5))
    with pytest.raises(MdpError):
        build_riverswim(6, 5, RiverSwimParams(start_advance=-0.1, start_stay=1.1))
    with pytest.raises(MdpError):
        build_riverswim(1, 5)


def test_mdp_is_immutable():
    mdp = build_riverswim(3, 2)
    with pytest.raises(ValueError):
        mdp.P[0, 0, 0, 0] = 0.5


def test_chain_forced_path():
    mdp = chain_mdp(H=4)
    policy = np.ones((4, 3), dtype=int)
    traj = sample_episode(mdp, policy, np.random.default_rng(0))
    assert traj.states.tolist() == [0, 1, 2, 2, 2]
    assert traj.rewards.tolist() == [0.0, 0.0, 1.0, 1.0]
    assert traj.terminal_state == 2
    assert len(traj.steps) == 4


def test_riverswim_always_left():
    mdp = build_riverswim(6, 20, RiverSwimParams(reward_kind=RewardKind.DETERMINISTIC))
    traj = sample_episode(mdp, np.zeros((20, 6), dtype=int), np.random.default_rng(3))
    assert np.all(traj.states == 0)
    assert np.all(traj.rewards == 0.05)


def test_sample_episode_reproducible():
    mdp = build_riverswim(6, 20)
    policy = np.random.default_rng(1).integers(0, 2, size=(20, 6))
    a = sample_episode(mdp, policy, np.random.default_rng(99))
    b = sample_episode(mdp, policy, np.random.default_rng(99))
    for field in ("states", "actions", "rewards"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()


def test_state_visits_match_occupancy():
    mdp = build_riverswim(6, 8)
    policy = np.ones((8, 6), dtype=int)
    n = 100_000
    rng = np.random.default_rng(2024)
    visits = np.zeros((9, 6))
    for _ in range(n):
        traj = sample_episode(mdp, policy, rng)
        visits[np.arange(9), traj.states] += 1
    freq = visits / n
    # oracle: forward propagation of the state distribution
    occ = np.zeros((9, 6))
    occ[0] = mdp.d1
    for h in range(8):
        occ[h + 1] = occ[h] @ mdp.P[h, :, RIGHT, :]
    np.testing.assert_allclose(state_occupancy(mdp, policy), occ, atol=1e-12)
    sigma = np.sqrt(occ * (1 - occ) / n)
    assert np.all(np.abs(freq - occ) <= 3 * sigma + 1e-12)


def test_value_iteration_constant_reward():
    rng = np.random.default_rng(0)
    base = random_mdp(3, 2, 5, rng)
    mdp = TabularMdp(P=base.P, r_mean=np.ones((5, 3, 2)), d1=base.d1)
    V, Q, _ = exact_value_iteration(mdp)
    for h in range(5):
        np.testing.assert_allclose(V[h], 5 - h)


def test_value_iteration_one_step():
    mdp = random_mdp(4, 3, 1, np.random.default_rng(1))
    V, _, pi = exact_value_iteration(mdp)
    np.testing.assert_allclose(V[0], mdp.r_mean[0].max(axis=1))
    np.testing.assert_array_equal(pi[0], mdp.r_mean[0].argmax(axis=1))


def test_value_iteration_matches_enumeration_on_small_riverswim():
    mdp = build_riverswim(3, 3)
    V, _, _ = exact_value_iteration(mdp)
    best = np.max([rollout_value(mdp, pol) for pol in enumerate_policies(3, 3, 2)], axis=0)
    np.testing.assert_allclose(V[0], best, atol=1e-10)


def test_value_iteration_ties_lowest_index():
    mdp = TabularMdp(P=np.full((2, 2, 3, 2), 0.5), r_mean=np.zeros((2, 2, 3)), d1=[0.5, 0.5])
    _, _, pi = exact_value_iteration(mdp)
    assert np.all(pi == 0)


def test_policy_evaluation_optimal_and_chain():
    mdp = build_riverswim(6, 20)
    V, _, pi = exact_value_iteration(mdp)
    np.testing.assert_allclose(policy_evaluation(mdp, pi), V, atol=1e-10)

    chain = chain_mdp(H=4)
    right = np.ones((4, 3), dtype=int)
    # 0 -> 1 -> 2 -> 2: rewards 0, 0, 1, 1
    assert policy_evaluation(chain, right)[0, 0] == pytest.approx(2.0)
    stay = np.zeros((4, 3), dtype=int)
    assert policy_evaluation(chain, stay)[0, 1] == pytest.approx(2.0)


def test_policy_evaluation_monte_carlo():
    mdp = build_riverswim(6, 10)
    policy = np.random.default_rng(5).integers(0, 2, size=(10, 6))
    exact = policy_evaluation(mdp, policy)[0, 0]
    rng = np.random.default_rng(6)
    n = 100_000
    returns = np.array([sample_episode(mdp, policy, rng).rewards.sum() for _ in range(n)])
    assert abs(returns.mean() - exact) <= 3 * returns.std() / np.sqrt(n)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 4), A=st.integers(1, 3), H=st.integers(1, 5))
def test_bellman_residual_and_dominance(seed, S, A, H):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(S, A, H, rng)
    V, Q, pi = exact_value_iteration(mdp)
    np.testing.assert_allclose(mdp.P.sum(axis=-1), 1.0, atol=1e-12)
    for h in range(H):
        resid = Q[h] - (mdp.r_mean[h] + mdp.P[h] @ V[h + 1])
        assert np.abs(resid).max() <= 1e-10
        assert np.abs(V[h] - Q[h].max(axis=1)).max() <= 1e-10
    policy = rng.integers(0, A, size=(H, S))
    assert np.all(policy_evaluation(mdp, policy) <= V + 1e-10)


def _env_doc():
    mdp = build_riverswim(3, 2)
    return mdp.to_json()


def test_json_round_trip(tmp_path):
    doc = _env_doc()
    path = tmp_path / "env.json"
    path.write_text(json.dumps(doc))
    mdp = load_mdp(path)
    np.testing.assert_array_equal(mdp.P, np.array(doc["P"]))
    assert mdp.reward_kind is RewardKind.BERNOULLI


def test_json_stationary_form():
    doc = _env_doc()
    doc["P"] = doc["P"][0]
    doc["r"] = doc["r"][0]
    mdp = mdp_from_json(doc)
    assert mdp.P.shape == (2, 3, 2, 3)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.pop("d1"), "missing field 'd1'"),
    (lambda d: d.__setitem__("S", 0), "field 'S'"),
    (lambda d: d["P"][1][2][0].__setitem__(0, 0.5), "P[1, 2, 0]"),
    (lambda d: d["P"][0][0][1].__setitem__(1, -0.2), "P[0, 0, 1, 1] is negative"),
    (lambda d: d["r"][1][0].__setitem__(1, 1.5), "r[1, 0, 1]"),
    (lambda d: d.__setitem__("reward_kind", "gaussian"), "reward_kind"),
    (lambda d: d.__setitem__("H", 5), "field 'P' has shape"),
])
def test_json_validation_errors(mutate, message):
    doc = _env_doc()
    mutate(doc)
    with pytest.raises(MdpError) as err:
        mdp_from_json(doc)
    assert message in str(err.value)


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "S": 2,\n  "A": oops\n}')
    with pytest.raises(MdpError, match="line 3"):
        load_mdp(path)


def test_initial_distribution_must_sum_to_one():
    with pytest.raises(MdpError, match="d1 sums to"):
        TabularMdp(P=np.full((1, 2, 1, 2), 0.5), r_mean=np.zeros((1, 2, 1)), d1=[0.5, 0.6])
