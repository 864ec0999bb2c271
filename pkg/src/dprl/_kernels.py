"""Compiled inner loops for the per-episode hot path."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def optimistic_sweep(P, r, static, inv_n, cap, iota, bonus_scale, bernstein):
    H, S, A, _ = P.shape
    Q = np.empty((H, S, A))
    V = np.zeros((H + 1, S))
    b = np.empty((H, S, A))
    for h in range(H - 1, -1, -1):
        for s in range(S):
            best = -np.inf
            for a in range(A):
                mean = 0.0
                second = 0.0
                for t in range(S):
                    pv = P[h, s, a, t] * V[h + 1, t]
                    mean += pv
                    second += pv * V[h + 1, t]
                bonus = static[h, s, a]
                if bernstein:
                    var = second - mean * mean
                    if var < 0.0:
                        var = 0.0
                    bonus += bonus_scale * 2.0 * np.sqrt(var * iota * inv_n[h, s, a])
                b[h, s, a] = bonus
                q = r[h, s, a] + mean + bonus
                if cap[h, s, a] < q:
                    q = cap[h, s, a]
                Q[h, s, a] = q
                if q > best:
                    best = q
            V[h, s] = best
    return Q, V, b


@njit(cache=True)
def bellman_optimal(P, r):
    """Exact backward induction; sums run in a fixed order so results are reproducible."""
    H, S, A, _ = P.shape
    Q = np.empty((H, S, A))
    V = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        for s in range(S):
            best = -np.inf
            for a in range(A):
                q = r[h, s, a]
                for t in range(S):
                    q += P[h, s, a, t] * V[h + 1, t]
                Q[h, s, a] = q
                if q > best:
                    best = q
            V[h, s] = best
    return V, Q


@njit(cache=True)
def evaluate_policy(P, r, policy):
    H, S, A, _ = P.shape
    V = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        for s in range(S):
            a = policy[h, s]
            v = r[h, s, a]
            for t in range(S):
                v += P[h, s, a, t] * V[h + 1, t]
            V[h, s] = v
    return V


@njit(cache=True)
def greedy(Q):
    H, S, A = Q.shape
    pi = np.zeros((H, S), dtype=np.int64)
    for h in range(H):
        for s in range(S):
            best = Q[h, s, 0]
            for a in range(1, A):
                if Q[h, s, a] > best:
                    best = Q[h, s, a]
                    pi[h, s] = a
    return pi


@njit(cache=True)
def _draw(cdf, u):
    n = cdf.shape[0]
    for i in range(n - 1):
        if u < cdf[i]:
            return i
    return n - 1


@njit(cache=True)
def rollout(cum_P, cum_d1, r_mean, bernoulli, policy, u):
    H = cum_P.shape[0]
    states = np.empty(H + 1, dtype=np.int64)
    actions = np.empty(H, dtype=np.int64)
    rewards = np.empty(H)
    s = _draw(cum_d1, u[0, 0])
    for h in range(H):
        a = policy[h, s]
        states[h] = s
        actions[h] = a
        mean = r_mean[h, s, a]
        if bernoulli:
            rewards[h] = 1.0 if u[h, 1] < mean else 0.0
        else:
            rewards[h] = mean
        s = _draw(cum_P[h, s, a], u[h + 1, 0])
    states[H] = s
    return states, actions, rewards
