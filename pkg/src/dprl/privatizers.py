"""Privatizers turning true counters into private counts.

Every privatizer returns :class:`PrivateCounts` after each episode.  With
probability at least ``1 - beta/3`` (over the privatizer's noise) these
satisfy, uniformly over cells and episodes:

1. ``|Ntil - N| <= E`` for transition and visit counts, ``|Rtil - R| <= E``;
2. ``N_sa <= Ntil_sa = sum_s' Ntil_sas`` and ``Ntil_sas > 0`` (for ``E > 0``).

``none``
    Exact counts.  ``E`` defaults to 0 (pure passthrough); a positive
    pinned ``E`` applies the same upward shifts as the private variants.
``central``
    Binary Mechanism on every visit, transition and reward stream with
    per-stream budget ``eps / (3 H L)``, ``L`` the tree depth for K releases.
``local``
    Each episode's indicator vectors are perturbed with Laplace(3H/eps)
    before being summed.

Both private variants then run the consistency projection with slack E/4
and the E/(2S), E/2 shifts; reward sums are released without projection.

Budget accounting: a trajectory sets at most H entries of each family to a
nonzero value in [0, 1].  Under the Binary Mechanism each entry reaches at
most ``L`` tree nodes, so a family costs ``H * L * eps/(3 H L) = eps/3``;
under local perturbation the family's L1 sensitivity is H, again ``eps/3``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .counts import CountTables
from .mdp import Trajectory
from .mechanisms import BinaryMechanism, bm_error_bound, laplace_sum_tail, tree_depth
from .projection import finalize_counts, project_batch

KINDS = ("none", "central", "local")


@dataclass(frozen=True)
class PrivatizerConfig:
    kind: str
    epsilon: float
    beta: float
    K: int
    H: int
    S: int
    A: int
    zero_noise: bool = False
    e_override: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown privatizer kind {self.kind!r}; expected one of {KINDS}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if min(self.K, self.H, self.S, self.A) < 1:
            raise ValueError("K, H, S, A must all be >= 1")
        if self.e_override is not None and self.e_override < 0:
            raise ValueError(f"e_override must be nonnegative, got {self.e_override}")

    @property
    def n_streams(self) -> int:
        """Visit, transition and reward streams: HSA + HS^2A + HSA."""
        return 2 * self.H * self.S * self.A + self.H * self.S * self.S * self.A

    @property
    def eps_prime(self) -> float:
        """Per-stream Binary Mechanism budget of the central privatizer."""
        return self.epsilon / (3 * self.H * tree_depth(self.K))

    @property
    def local_scale(self) -> float:
        return 3 * self.H / self.epsilon


def privatizer_E_bound(config: PrivatizerConfig) -> float:
    """Theoretical E: four times a uniform bound on the noisy-count error.

    The failure budget beta/3 is split evenly over all streams; each
    per-stream bound is itself uniform over the K release times.
    """
    if config.kind == "none":
        return 0.0
    beta_stream = config.beta / (3 * config.n_streams)
    if config.kind == "central":
        err = bm_error_bound(config.K, config.eps_prime, beta_stream)
    else:
        err = laplace_sum_tail(config.local_scale, config.K, beta_stream / config.K)
    return 4.0 * err


@dataclass(frozen=True)
class PrivateCounts:
    Ntil_sa: np.ndarray
    Ntil_sas: np.ndarray
    Rtil_sa: np.ndarray
    E_bound: float

    @property
    def Ntil_s(self) -> np.ndarray:
        """Per-state totals summed over actions, shape (H, S)."""
        return self.Ntil_sa.sum(axis=-1)

    @classmethod
    def zeros(cls, H: int, S: int, A: int, E: float = 0.0) -> PrivateCounts:
        return cls(np.zeros((H, S, A)), np.zeros((H, S, A, S)), np.zeros((H, S, A)), E)


def assumption1_holds(pc: PrivateCounts, counts: CountTables, atol: float = 1e-9) -> bool:
    """Check the private-count accuracy contract against the true counters."""
    E = pc.E_bound
    N_sa = counts.N_sa
    return bool(
        np.all(np.abs(pc.Ntil_sas - counts.N_sas) <= E + atol)
        and np.all(np.abs(pc.Rtil_sa - counts.R_sa) <= E + atol)
        and np.all(pc.Ntil_sa >= N_sa - atol)
        and np.all(pc.Ntil_sa <= N_sa + E + atol)
        and np.array_equal(pc.Ntil_sa, pc.Ntil_sas.sum(axis=-1))
        and (E == 0 or np.all(pc.Ntil_sas > 0))
    )


class Privatizer(Protocol):
    config: PrivatizerConfig
    E: float

    def on_episode_end(self, counts: CountTables, traj: Trajectory) -> PrivateCounts: ...


def _indicators(traj: Trajectory, H: int, S: int, A: int):
    hs = np.arange(H)
    s, a, s_next = traj.states[:-1], traj.actions, traj.states[1:]
    sa = np.zeros((H, S, A))
    sas = np.zeros((H, S, A, S))
    rew = np.zeros((H, S, A))
    sa[hs, s, a] = 1.0
    sas[hs, s, a, s_next] = 1.0
    rew[hs, s, a] = traj.rewards
    return sa, sas, rew


class _BasePrivatizer:
    def __init__(self, config: PrivatizerConfig):
        self.config = config
        self.E = privatizer_E_bound(config) if config.e_override is None else float(config.e_override)
        self.episodes = 0

    def _tick(self) -> None:
        if self.episodes >= self.config.K:
            raise RuntimeError(f"privatizer budget of K={self.config.K} episodes exhausted")
        self.episodes += 1

    def _consistent(self, noisy_sas: np.ndarray, noisy_sa: np.ndarray, Rtil: np.ndarray) -> PrivateCounts:
        x, _ = project_batch(noisy_sas, noisy_sa, self.E / 4)
        dest, total = finalize_counts(x, self.config.S, self.E)
        return PrivateCounts(total, dest, Rtil, self.E)


class NonePrivatizer(_BasePrivatizer):
    def on_episode_end(self, counts: CountTables, traj: Trajectory) -> PrivateCounts:
        self._tick()
        N_sas = counts.N_sas.astype(float)
        R = counts.R_sa.copy()
        if self.E == 0:
            return PrivateCounts(N_sas.sum(axis=-1), N_sas, R, 0.0)
        return self._consistent(N_sas, counts.N_sa.astype(float), R)


class CentralPrivatizer(_BasePrivatizer):
    def __init__(self, config: PrivatizerConfig, rng: np.random.Generator):
        super().__init__(config)
        H, S, A = config.H, config.S, config.A
        rngs = rng.spawn(3)
        mk = lambda shape, r: BinaryMechanism(config.K, config.eps_prime, r, shape=shape,
                                              zero_noise=config.zero_noise)
        self.bm_sa = mk((H, S, A), rngs[0])
        self.bm_sas = mk((H, S, A, S), rngs[1])
        self.bm_rew = mk((H, S, A), rngs[2])

    def on_episode_end(self, counts: CountTables, traj: Trajectory) -> PrivateCounts:
        self._tick()
        sa, sas, rew = _indicators(traj, self.config.H, self.config.S, self.config.A)
        self.bm_sa.append(sa)
        self.bm_sas.append(sas)
        self.bm_rew.append(rew)
        return self._consistent(self.bm_sas.release(), self.bm_sa.release(), self.bm_rew.release())


class LocalPrivatizer(_BasePrivatizer):
    def __init__(self, config: PrivatizerConfig, rng: np.random.Generator):
        super().__init__(config)
        H, S, A = config.H, config.S, config.A
        self._rng = rng
        self.noisy_sa = np.zeros((H, S, A))
        self.noisy_sas = np.zeros((H, S, A, S))
        self.noisy_rew = np.zeros((H, S, A))

    def _perturb(self, values: np.ndarray) -> np.ndarray:
        if self.config.zero_noise:
            return values
        return values + self._rng.laplace(0.0, self.config.local_scale, size=values.shape)

    def on_episode_end(self, counts: CountTables, traj: Trajectory) -> PrivateCounts:
        self._tick()
        sa, sas, rew = _indicators(traj, self.config.H, self.config.S, self.config.A)
        # perturbation happens on the user's side, before aggregation
        self.noisy_sa += self._perturb(sa)
        self.noisy_sas += self._perturb(sas)
        self.noisy_rew += self._perturb(rew)
        return self._consistent(self.noisy_sas, self.noisy_sa, self.noisy_rew.copy())


def make_privatizer(config: PrivatizerConfig, rng: np.random.Generator | None = None):
    if config.kind == "none":
        return NonePrivatizer(config)
    if rng is None:
        rng = np.random.default_rng()
    if config.kind == "central":
        return CentralPrivatizer(config, rng)
    return LocalPrivatizer(config, rng)


def on_episode_end(privatizer, counts: CountTables, traj: Trajectory) -> PrivateCounts:
    return privatizer.on_episode_end(counts, traj)
