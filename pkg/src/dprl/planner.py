"""Optimistic value iteration on private counts, plus a non-private Hoeffding baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._kernels import greedy, optimistic_sweep
from .counts import CountTables
from .mdp import TabularMdp, exact_value_iteration, policy_evaluation, sample_episode
from .privatizers import (
    PrivateCounts,
    PrivatizerConfig,
    assumption1_holds,
    make_privatizer,
)

BONUS_KINDS = ("bernstein", "hoeffding")
# leading constant inside the min{.., H^2} of the variance-correction term
_C = 1000.0 ** 2


class ContractViolation(ValueError):
    """Private counts break the Ntil_sa = sum Ntil_sas > 0 contract."""


@dataclass(frozen=True)
class RunConfig:
    K: int
    privatizer: str = "none"
    epsilon: float = 1.0
    beta: float = 0.1
    bonus_scale: float = 1.0
    seed: int = 0
    bonus: str = "bernstein"
    e_override: float | None = None
    zero_noise: bool = False
    label: str = ""

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.bonus_scale > 0:
            raise ValueError(f"bonus_scale must be positive, got {self.bonus_scale}")
        if self.bonus not in BONUS_KINDS:
            raise ValueError(f"bonus must be one of {BONUS_KINDS}, got {self.bonus!r}")

    def privatizer_config(self, mdp: TabularMdp) -> PrivatizerConfig:
        return PrivatizerConfig(kind=self.privatizer, epsilon=self.epsilon, beta=self.beta,
                                K=self.K, H=mdp.H, S=mdp.S, A=mdp.A,
                                zero_noise=self.zero_noise, e_override=self.e_override)


def log_factor(H: int, S: int, A: int, K: int, beta: float) -> float:
    """iota = log(30 H S A T / beta) with T = K H."""
    return math.log(30 * H * S * A * K * H / beta)


@dataclass
class PlannerState:
    Qtil: np.ndarray      # (H, S, A)
    Vtil: np.ndarray      # (H + 1, S), Vtil[H] = 0
    Ptil: np.ndarray      # (H, S, A, S)
    rtil: np.ndarray      # (H, S, A)
    bonus: np.ndarray     # (H, S, A)
    iota: float
    bonus_scale: float


def private_estimates(pc: PrivateCounts) -> tuple[np.ndarray, np.ndarray]:
    """Transition and reward estimates from private counts.

    Cells with ``Ntil_sa == 0`` (never updated) get a uniform row and zero
    reward; their bonus is infinite, so the values never matter.
    """
    n = pc.Ntil_sa
    if np.any(pc.Ntil_sas < 0) or np.any(n < 0):
        raise ContractViolation("negative private counts")
    if np.any((n == 0) & np.any(pc.Ntil_sas != 0, axis=-1)):
        raise ContractViolation("zero Ntil_sa with nonzero destination counts")
    S = pc.Ntil_sas.shape[-1]
    live = n > 0
    safe = np.where(live, n, 1.0)
    P = np.where(live[..., None], pc.Ntil_sas / safe[..., None], 1.0 / S)
    r = np.where(live, np.clip(pc.Rtil_sa / safe, 0.0, 1.0), 0.0)
    return P, r


def _inverse(n: np.ndarray) -> np.ndarray:
    return np.divide(1.0, n, out=np.zeros_like(n, dtype=float), where=n > 0)


def _correction_terms(pc: PrivateCounts, P: np.ndarray, iota: float, E: float) -> np.ndarray:
    """Per-cell bonus terms that do not depend on the value function (unscaled).

    Covers sqrt(2 iota/N), the privacy term 20 H S E iota/N and the variance
    correction built from next-step state counts.  Infinite where N == 0.
    """
    H, S, A, _ = P.shape
    n = pc.Ntil_sa
    inv = _inverse(n)
    out = np.sqrt(2.0 * iota * inv) + 20.0 * H * S * E * iota * inv

    n_next = pc.Ntil_s[1:]                      # (H-1, S): Ntil_{h+1}(s')
    inv1 = _inverse(n_next)
    raw = (_C * H**3 * S * A * iota**2 * inv1
           + _C * H**4 * S**4 * A**2 * E**2 * iota**4 * inv1**2
           + _C * H**6 * S**4 * A**2 * iota**4 * inv1**2)
    capped = np.where(n_next > 0, np.minimum(raw, float(H * H)), float(H * H))
    # at the last step both next-step values are identically zero, so the
    # correction vanishes
    spread = np.zeros((H, S, A))
    spread[:-1] = (P[:-1] * capped[:, None, None, :]).sum(axis=-1)
    out = out + 4.0 * math.sqrt(iota) * np.sqrt(spread * inv)
    return np.where(n > 0, out, np.inf)


def bernstein_bonus(pc: PrivateCounts, Ptil: np.ndarray, Vtil_next: np.ndarray, h: int, s: int, a: int,
                    iota: float, E: float | None = None, bonus_scale: float = 1.0) -> float:
    """Private Bernstein bonus of a single cell (``h`` zero-based)."""
    E = pc.E_bound if E is None else E
    n = pc.Ntil_sa[h, s, a]
    if n <= 0:
        return math.inf
    static = _correction_terms(pc, Ptil, iota, E)[h, s, a]
    p = Ptil[h, s, a]
    mean = p @ Vtil_next
    var = max(p @ (Vtil_next * Vtil_next) - mean * mean, 0.0)
    return bonus_scale * (2.0 * math.sqrt(var * iota / n) + static)


def hoeffding_bonus(n: np.ndarray, H: int, iota: float, bonus_scale: float = 1.0) -> np.ndarray:
    """bonus_scale * H * sqrt(iota / N); infinite for unvisited cells."""
    return np.where(n > 0, bonus_scale * H * np.sqrt(iota * _inverse(n)), np.inf)


def backward_induction(prev_Q: np.ndarray, pc: PrivateCounts, iota: float, bonus_scale: float = 1.0,
                       bonus: str = "bernstein") -> tuple[PlannerState, np.ndarray]:
    """One optimistic planning pass; returns the new state and greedy policy (H, S)."""
    H, S, A = prev_Q.shape
    P, r = private_estimates(pc)
    n = pc.Ntil_sa
    inv = _inverse(n)
    if bonus == "bernstein":
        static = bonus_scale * _correction_terms(pc, P, iota, pc.E_bound)
    else:
        static = hoeffding_bonus(n, H, iota, bonus_scale)

    cap = np.minimum(prev_Q, float(H))
    Q, V, b = optimistic_sweep(P, r, static, inv, cap, iota, bonus_scale, bonus == "bernstein")
    policy = greedy(Q)
    state = PlannerState(Qtil=Q, Vtil=V, Ptil=P, rtil=r, bonus=b, iota=iota, bonus_scale=bonus_scale)
    return state, policy


@dataclass
class RegretRecord:
    per_episode_regret: np.ndarray
    cumulative: np.ndarray
    seed: int
    arm: str
    assumption1_held: bool
    actions: np.ndarray | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegretRecord):
            return NotImplemented
        return (self.seed == other.seed and self.arm == other.arm
                and self.assumption1_held == other.assumption1_held
                and np.array_equal(self.per_episode_regret, other.per_episode_regret)
                and np.array_equal(self.cumulative, other.cumulative))


Observer = Callable[[int, PlannerState, PrivateCounts, CountTables], None]


def dp_ucbvi_run(mdp: TabularMdp, config: RunConfig, observer: Observer | None = None,
                 keep_actions: bool = False) -> RegretRecord:
    """Run K episodes of optimistic planning with the configured privatizer.

    Regret of episode k is ``V*_1(s_1) - V^{pi_k}_1(s_1)`` evaluated exactly
    on the true model.  ``observer(k, state, pc, counts)`` is called after
    each planning pass (k zero-based), before the episode is played.
    """
    H, S, A, K = mdp.H, mdp.S, mdp.A, config.K
    env_rng, priv_rng = np.random.default_rng(config.seed).spawn(2)
    iota = log_factor(H, S, A, K, config.beta)
    privatizer = make_privatizer(config.privatizer_config(mdp), priv_rng)
    V_star = exact_value_iteration(mdp)[0][0]

    counts = CountTables(H, S, A)
    pc = PrivateCounts.zeros(H, S, A, privatizer.E)
    Q = np.full((H, S, A), float(H))
    regret = np.empty(K)
    actions = np.empty((K, H), dtype=np.int8) if keep_actions else None
    held = True
    last_policy, last_value = None, None
    for k in range(K):
        state, policy = backward_induction(Q, pc, iota, config.bonus_scale, config.bonus)
        Q = state.Qtil
        if observer is not None:
            observer(k, state, pc, counts)
        traj = sample_episode(mdp, policy, env_rng)
        if last_policy is None or not np.array_equal(policy, last_policy):
            last_policy, last_value = policy, policy_evaluation(mdp, policy)[0]
        s1 = traj.states[0]
        regret[k] = V_star[s1] - last_value[s1]
        if actions is not None:
            actions[k] = traj.actions
        counts.update(traj)
        pc = privatizer.on_episode_end(counts, traj)
        if held:
            held = assumption1_holds(pc, counts)
    label = config.label or config.privatizer
    return RegretRecord(regret, np.cumsum(regret), config.seed, label, held, actions)


def ucbvi_hoeffding_baseline(mdp: TabularMdp, config: RunConfig, observer: Observer | None = None,
                             keep_actions: bool = False) -> RegretRecord:
    """Non-private UCBVI: true counts, bonus ``bonus_scale * H * sqrt(iota / N)``."""
    cfg = RunConfig(K=config.K, privatizer="none", epsilon=config.epsilon, beta=config.beta,
                    bonus_scale=config.bonus_scale, seed=config.seed, bonus="hoeffding",
                    label=config.label or "ucbvi")
    return dp_ucbvi_run(mdp, cfg, observer, keep_actions)
