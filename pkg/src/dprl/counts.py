"""True (non-private) visitation and reward counters."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mdp import Trajectory


@dataclass
class CountTables:
    H: int
    S: int
    A: int
    N_sa: np.ndarray = field(init=False)
    N_sas: np.ndarray = field(init=False)
    R_sa: np.ndarray = field(init=False)
    episodes_seen: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        self.N_sa = np.zeros((self.H, self.S, self.A), dtype=np.int64)
        self.N_sas = np.zeros((self.H, self.S, self.A, self.S), dtype=np.int64)
        self.R_sa = np.zeros((self.H, self.S, self.A))

    def update(self, traj: Trajectory) -> CountTables:
        """Add one trajectory in place and return ``self``."""
        if traj.H != self.H:
            raise IndexError(f"trajectory length {traj.H} does not match horizon {self.H}")
        s, a, s_next = traj.states[:-1], traj.actions, traj.states[1:]
        if s.min() < 0 or traj.states.max() >= self.S or a.min() < 0 or a.max() >= self.A:
            raise IndexError("trajectory state or action index out of range")
        hs = np.arange(self.H)
        # every h appears once, so plain fancy-index increments are safe
        self.N_sa[hs, s, a] += 1
        self.N_sas[hs, s, a, s_next] += 1
        self.R_sa[hs, s, a] += traj.rewards
        self.episodes_seen += 1
        return self

    def check_invariants(self) -> None:
        if not np.array_equal(self.N_sa, self.N_sas.sum(axis=3)):
            raise AssertionError("N_sa != sum over s' of N_sas")
        if not np.all(self.N_sa.sum(axis=(1, 2)) == self.episodes_seen):
            raise AssertionError("per-step visit totals differ from episodes_seen")
        if np.any(self.R_sa > self.N_sa + 1e-9) or np.any(self.R_sa < 0):
            raise AssertionError("R_sa outside [0, N_sa]")

    def to_json(self) -> str:
        return json.dumps({
            "H": self.H, "S": self.S, "A": self.A,
            "episodes_seen": self.episodes_seen,
            "N_sa": self.N_sa.tolist(),
            "N_sas": self.N_sas.tolist(),
            "R_sa": self.R_sa.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> CountTables:
        doc = json.loads(text)
        out = cls(doc["H"], doc["S"], doc["A"])
        out.N_sa[...] = doc["N_sa"]
        out.N_sas[...] = doc["N_sas"]
        out.R_sa[...] = doc["R_sa"]
        out.episodes_seen = doc["episodes_seen"]
        return out


def update_with_trajectory(counts: CountTables, traj: Trajectory) -> CountTables:
    return counts.update(traj)
