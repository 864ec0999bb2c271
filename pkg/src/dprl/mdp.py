"""Ground-truth episodic tabular MDPs: construction, sampling and exact planning.

Indices are zero-based throughout: step ``h`` runs over ``0..H-1`` and the
value arrays carry an extra terminal row ``V[H] = 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from . import _kernels

ROW_TOL = 1e-12


class MdpError(ValueError):
    """Raised when an MDP (or its JSON description) violates an invariant."""


class RewardKind(str, Enum):
    DETERMINISTIC = "deterministic"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class TabularMdp:
    """Finite-horizon MDP with non-stationary transitions.

    ``P`` has shape (H, S, A, S), ``r_mean`` (H, S, A) and ``d1`` (S,).
    Arrays are made read-only so an instance can be shared between runs.
    """

    P: np.ndarray
    r_mean: np.ndarray
    d1: np.ndarray
    reward_kind: RewardKind = RewardKind.BERNOULLI

    def __post_init__(self) -> None:
        P = np.array(self.P, dtype=float)
        r = np.array(self.r_mean, dtype=float)
        d1 = np.array(self.d1, dtype=float)
        if P.ndim != 4 or P.shape[1] != P.shape[3]:
            raise MdpError(f"P must have shape (H, S, A, S), got {P.shape}")
        H, S, A, _ = P.shape
        if min(H, S, A) < 1:
            raise MdpError(f"H, S, A must be >= 1, got {(H, S, A)}")
        if r.shape != (H, S, A):
            raise MdpError(f"r_mean must have shape {(H, S, A)}, got {r.shape}")
        if d1.shape != (S,):
            raise MdpError(f"d1 must have shape {(S,)}, got {d1.shape}")
        _check_distribution(P, "P")
        _check_distribution(d1, "d1")
        if not np.all(np.isfinite(r)) or r.min() < 0.0 or r.max() > 1.0:
            bad = tuple(int(i) for i in np.argwhere(~((r >= 0) & (r <= 1)))[0])
            raise MdpError(f"r_mean{list(bad)} = {r[bad]} is outside [0, 1]")
        for arr in (P, r, d1):
            arr.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r_mean", r)
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "reward_kind", RewardKind(self.reward_kind))

    @property
    def H(self) -> int:
        return self.P.shape[0]

    @property
    def S(self) -> int:
        return self.P.shape[1]

    @property
    def A(self) -> int:
        return self.P.shape[2]

    @cached_property
    def _cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        return np.cumsum(self.P, axis=-1), np.cumsum(self.d1)

    def to_json(self) -> dict[str, Any]:
        return {
            "S": self.S,
            "A": self.A,
            "H": self.H,
            "P": self.P.tolist(),
            "r": self.r_mean.tolist(),
            "d1": self.d1.tolist(),
            "reward_kind": self.reward_kind.value,
        }


def _check_distribution(p: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(p)):
        raise MdpError(f"{name} contains non-finite entries")
    neg = np.argwhere(p < 0)
    if neg.size:
        idx = [int(i) for i in neg[0]]
        raise MdpError(f"{name}{idx} is negative ({p[tuple(idx)]})")
    sums = np.atleast_1d(p.sum(axis=-1))
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        idx = [int(i) for i in bad[0]]
        where = f"{name}{idx}" if p.ndim > 1 else name
        raise MdpError(f"{where} sums to {float(sums[tuple(idx)])!r}, expected 1")


@dataclass(frozen=True)
class RiverSwimParams:
    """Transition and reward parameters of the RiverSwim chain.

    ``right_*`` apply to interior states, ``start_*`` to state 0 and
    ``end_*`` to state S-1 when swimming right.  Swimming left always moves
    one state left (clamped at 0).
    """

    right_advance: float = 0.3
    right_stay: float = 0.6
    right_back: float = 0.1
    start_advance: float = 0.3
    start_stay: float = 0.7
    end_stay: float = 0.9
    end_back: float = 0.1
    r_left: float = 0.05
    r_right: float = 1.0
    reward_kind: RewardKind = RewardKind.BERNOULLI


LEFT, RIGHT = 0, 1


def build_riverswim(S: int = 6, H: int = 20, params: RiverSwimParams | None = None) -> TabularMdp:
    if params is None:
        params = RiverSwimParams()
    if S < 2:
        raise MdpError(f"RiverSwim needs S >= 2, got {S}")
    triples = {
        "interior": (params.right_advance, params.right_stay, params.right_back),
        "start": (params.start_advance, params.start_stay, 0.0),
        "end": (0.0, params.end_stay, params.end_back),
    }
    for name, probs in triples.items():
        if min(probs) < 0 or abs(sum(probs) - 1.0) > ROW_TOL:
            raise MdpError(f"RiverSwim {name} probabilities {probs} are not a distribution")

    P = np.zeros((S, 2, S))
    for s in range(S):
        P[s, LEFT, max(s - 1, 0)] = 1.0
    P[0, RIGHT, 0] += params.start_stay
    P[0, RIGHT, 1] += params.start_advance
    P[S - 1, RIGHT, S - 1] += params.end_stay
    P[S - 1, RIGHT, S - 2] += params.end_back
    for s in range(1, S - 1):
        P[s, RIGHT, s + 1] += params.right_advance
        P[s, RIGHT, s] += params.right_stay
        P[s, RIGHT, s - 1] += params.right_back

    r = np.zeros((S, 2))
    r[0, LEFT] = params.r_left
    r[S - 1, RIGHT] = params.r_right
    d1 = np.zeros(S)
    d1[0] = 1.0
    return TabularMdp(
        P=np.broadcast_to(P, (H, S, 2, S)),
        r_mean=np.broadcast_to(r, (H, S, 2)),
        d1=d1,
        reward_kind=params.reward_kind,
    )


def random_mdp(S: int, A: int, H: int, rng: np.random.Generator,
               reward_kind: RewardKind = RewardKind.BERNOULLI) -> TabularMdp:
    """Random non-stationary MDP (Dirichlet rows, uniform mean rewards)."""
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    P /= P.sum(axis=-1, keepdims=True)
    return TabularMdp(P=P, r_mean=rng.uniform(size=(H, S, A)),
                      d1=rng.dirichlet(np.ones(S)), reward_kind=reward_kind)


@dataclass(frozen=True)
class Trajectory:
    """One episode: ``states`` has length H+1 (last entry is terminal)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    @property
    def H(self) -> int:
        return len(self.actions)

    @property
    def terminal_state(self) -> int:
        return int(self.states[-1])

    @property
    def steps(self) -> list[tuple[int, int, float]]:
        return [(int(s), int(a), float(r))
                for s, a, r in zip(self.states[:-1], self.actions, self.rewards)]


def sample_episode(mdp: TabularMdp, policy: np.ndarray, rng: np.random.Generator) -> Trajectory:
    """Roll out a deterministic ``policy`` of shape (H, S) for one episode.

    Draws are inverse-CDF lookups on ``H + 1`` pairs of uniforms taken from
    ``rng`` up front, so the trajectory is a pure function of the rng state.
    """
    u = rng.random((mdp.H + 1, 2))
    cum_P, cum_d1 = mdp._cumulative
    states, actions, rewards = _kernels.rollout(cum_P, cum_d1, mdp.r_mean,
                                       mdp.reward_kind is RewardKind.BERNOULLI,
                                       np.asarray(policy, dtype=np.int64), u)
    return Trajectory(states, actions, rewards)


def exact_value_iteration(mdp: TabularMdp) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward induction on the true model.

    Returns ``(V, Q, pi)`` with shapes (H+1, S), (H, S, A), (H, S); ties in
    the greedy action go to the lowest index.
    """
    V, Q = _kernels.bellman_optimal(mdp.P, mdp.r_mean)
    return V, Q, _kernels.greedy(Q)


def policy_evaluation(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Exact value (H+1, S) of a deterministic policy."""
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (mdp.H, mdp.S):
        raise ValueError(f"policy must have shape {(mdp.H, mdp.S)}, got {policy.shape}")
    return _kernels.evaluate_policy(mdp.P, mdp.r_mean, policy)


def state_occupancy(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Distribution of s_h for h = 0..H under ``policy``, shape (H+1, S)."""
    H, S = mdp.H, mdp.S
    occ = np.zeros((H + 1, S))
    occ[0] = mdp.d1
    idx = np.arange(S)
    for h in range(H):
        occ[h + 1] = occ[h] @ mdp.P[h, idx, policy[h]]
    return occ


# --- JSON environment files -------------------------------------------------

def _field_array(doc: dict, key: str, depths: tuple[int, ...]) -> np.ndarray:
    if key not in doc:
        raise MdpError(f"missing field '{key}'")
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise MdpError(f"field '{key}' is not a rectangular numeric array: {exc}") from None
    if arr.ndim not in depths:
        raise MdpError(f"field '{key}' has nesting depth {arr.ndim}, expected one of {depths}")
    return arr


def mdp_from_json(doc: dict[str, Any]) -> TabularMdp:
    """Build an MDP from the JSON environment schema.

    ``P`` may be given per step (depth 4) or stationary (depth 3, replicated
    over h); likewise ``r`` at depth 3 or 2.
    """
    if not isinstance(doc, dict):
        raise MdpError("environment file must contain a JSON object")
    dims = {}
    for key in ("S", "A", "H"):
        val = doc.get(key)
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise MdpError(f"field '{key}' must be an integer >= 1, got {val!r}")
        dims[key] = val
    S, A, H = dims["S"], dims["A"], dims["H"]
    P = _field_array(doc, "P", (3, 4))
    r = _field_array(doc, "r", (2, 3))
    d1 = _field_array(doc, "d1", (1,))
    if P.ndim == 3:
        P = np.broadcast_to(P, (H, *P.shape))
    if r.ndim == 2:
        r = np.broadcast_to(r, (H, *r.shape))
    if P.shape != (H, S, A, S):
        raise MdpError(f"field 'P' has shape {P.shape}, expected {(H, S, A, S)}")
    if r.shape != (H, S, A):
        raise MdpError(f"field 'r' has shape {r.shape}, expected {(H, S, A)}")
    kind = doc.get("reward_kind", RewardKind.BERNOULLI.value)
    try:
        kind = RewardKind(kind)
    except ValueError:
        raise MdpError(f"field 'reward_kind' must be 'bernoulli' or 'deterministic', got {kind!r}") from None
    try:
        return TabularMdp(P=P, r_mean=r, d1=d1, reward_kind=kind)
    except MdpError as exc:
        msg = str(exc)
        raise MdpError(msg.replace("r_mean", "r", 1) if msg.startswith("r_mean") else msg) from None


def load_mdp(path: str | Path) -> TabularMdp:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MdpError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return mdp_from_json(doc)
    except MdpError as exc:
        raise MdpError(f"{path}: {exc}") from None
