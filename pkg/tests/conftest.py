from __future__ import annotations

import itertools

import numpy as np
import pytest

from dprl.mdp import TabularMdp, RewardKind


def enumerate_policies(H: int, S: int, A: int):
    """Every deterministic policy as an (H, S) array."""
    for flat in itertools.product(range(A), repeat=H * S):
        yield np.array(flat, dtype=np.int64).reshape(H, S)


def rollout_value(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Expected return from every start state by summing over all state paths."""
    H, S = mdp.H, mdp.S
    out = np.zeros(S)
    for s0 in range(S):
        total = 0.0
        for path in itertools.product(range(S), repeat=H - 1):
            states = (s0, *path)
            prob, ret = 1.0, 0.0
            for h, s in enumerate(states):
                a = policy[h, s]
                ret += mdp.r_mean[h, s, a]
                if h + 1 < H:
                    prob *= mdp.P[h, s, a, states[h + 1]]
            total += prob * ret
        out[s0] = total
    return out


def chain_mdp(H: int = 4) -> TabularMdp:
    """Deterministic 3-state chain: action 0 stays, action 1 moves right (clamped)."""
    S, A = 3, 2
    P = np.zeros((H, S, A, S))
    for s in range(S):
        P[:, s, 0, s] = 1.0
        P[:, s, 1, min(s + 1, S - 1)] = 1.0
    r = np.zeros((H, S, A))
    r[:, 2, :] = 1.0
    r[:, 1, 0] = 0.5
    d1 = np.array([1.0, 0.0, 0.0])
    return TabularMdp(P=P, r_mean=r, d1=d1, reward_kind=RewardKind.DETERMINISTIC)


# acceptance results are collected here and printed once at the end
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
