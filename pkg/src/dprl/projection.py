"""Min-max consistency projection of noisy per-destination counts.

Given noisy destination counts ``d`` (length S), a noisy total ``T`` and a
slack ``w``, find x >= 0 minimising ``max_i |x_i - d_i|`` subject to
``|sum(x) - T| <= w``.

For a fixed deviation t the feasible x_i form the boxes
``[max(0, d_i - t), d_i + t]`` (empty when d_i + t < 0), so t is feasible iff
``t >= -min(d)`` and the interval of reachable sums ``[sum max(0, d_i - t),
sum(d) + S t]`` meets ``[T - w, T + w]``.  Writing ``C_j`` for the sum of the
j largest entries, ``sum max(0, d_i - t) = max_j (C_j - j t)``, which turns
every condition into a linear lower bound on t::

    t* = max(0, -min d, max_j (C_j - (T + w)) / j, (T - w - sum d) / S)

When ``T + w < 0`` no x >= 0 satisfies the sum constraint; the target sum is
then taken as 0 (the nearest reachable value), which forces x = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProjectionProblem:
    noisy_dest: np.ndarray
    noisy_total: float
    slack: float

    def __post_init__(self) -> None:
        dest = np.atleast_1d(np.asarray(self.noisy_dest, dtype=float))
        if dest.ndim != 1 or dest.size < 1:
            raise ValueError("noisy_dest must be a non-empty vector")
        if not self.slack >= 0:
            raise ValueError(f"slack must be nonnegative, got {self.slack}")
        object.__setattr__(self, "noisy_dest", dest)

    @property
    def feasible(self) -> bool:
        return self.noisy_total + self.slack >= 0


@dataclass(frozen=True)
class ProjectionSolution:
    x: np.ndarray
    t_star: float


def _target_interval(total, slack):
    hi = np.maximum(total + slack, 0.0)
    lo = np.minimum(np.maximum(total - slack, 0.0), hi)
    return lo, hi


def project_batch(noisy_dest: np.ndarray, noisy_total: np.ndarray, slack) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`project` over leading axes.

    ``noisy_dest`` has shape (..., S) and ``noisy_total`` shape (...).
    Returns ``(x, t_star)``.
    """
    d = np.asarray(noisy_dest, dtype=float)
    total = np.asarray(noisy_total, dtype=float)
    S = d.shape[-1]
    lo, hi = _target_interval(total, slack)

    ranked = -np.sort(-d, axis=-1)
    prefix = np.cumsum(ranked, axis=-1)
    t_upper = ((prefix - hi[..., None]) / np.arange(1, S + 1)).max(axis=-1)
    t_lower = (lo - d.sum(axis=-1)) / S
    t = np.maximum.reduce([np.zeros_like(total), -d.min(axis=-1), t_upper, t_lower])

    t_col = t[..., None]
    box_lo = np.maximum(d - t_col, 0.0)
    box_hi = np.maximum(d + t_col, box_lo)
    x = np.clip(d, box_lo, box_hi)
    # move the sum onto the target interval, spreading the change over each
    # coordinate's remaining room in proportion to that room
    s0 = x.sum(axis=-1)
    target = np.clip(s0, lo, hi)
    gap = target - s0
    room = np.where(gap[..., None] > 0, box_hi - x, x - box_lo)
    room_total = room.sum(axis=-1)
    frac = np.divide(gap, room_total, out=np.zeros_like(gap), where=room_total > 0)
    x = np.clip(x + frac[..., None] * room, box_lo, box_hi)
    return x, t


def project(problem: ProjectionProblem) -> ProjectionSolution:
    x, t = project_batch(problem.noisy_dest, np.float64(problem.noisy_total), problem.slack)
    return ProjectionSolution(x=x, t_star=float(t))


def _grid_feasible(d: np.ndarray, t: float, lo: float, hi: float) -> bool:
    if t < -d.min():
        return False
    reach_lo = np.maximum(d - t, 0.0).sum()
    reach_hi = (d + t).sum()
    return reach_lo <= hi and reach_hi >= lo


def project_oracle(problem: ProjectionProblem, grid: float = 1e-4) -> ProjectionSolution:
    """Reference solver: scan t = 0, grid, 2*grid, ... and return the first feasible t.

    Slow by design; meant for cross-checking :func:`project` at small S.
    """
    d = problem.noisy_dest
    lo, hi = (float(v) for v in _target_interval(problem.noisy_total, problem.slack))
    # every coordinate can always be moved onto [lo/S, hi/S], so this t is feasible
    t_max = float(np.abs(d).max()) + hi + 1.0
    n_max = math.ceil(t_max / grid)

    # feasibility is monotone in t, so the first feasible grid index can be
    # found by bisection instead of walking every point
    left, right = 0, n_max
    while left < right:
        mid = (left + right) // 2
        if _grid_feasible(d, mid * grid, lo, hi):
            right = mid
        else:
            left = mid + 1
    t = left * grid

    box_lo = np.maximum(d - t, 0.0)
    box_hi = d + t
    x = box_lo.copy()
    need = lo - x.sum()
    for i in range(len(d)):
        if need <= 0:
            break
        add = min(box_hi[i] - x[i], need)
        x[i] += add
        need -= add
    return ProjectionSolution(x=x, t_star=t)


def finalize_counts(x, S: int, E: float) -> tuple[np.ndarray, np.ndarray]:
    """Shift projected counts up so they never underestimate.

    Each destination gets ``E / (2S)``; the total is the sum of the shifted
    destinations, i.e. the projected sum plus ``E / 2``.  Works on (..., S).
    """
    if isinstance(x, ProjectionSolution):
        x = x.x
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != S:
        raise ValueError(f"expected last axis of size {S}, got {x.shape}")
    if E < 0:
        raise ValueError(f"E must be nonnegative, got {E}")
    dest = x + E / (2 * S)
    return dest, dest.sum(axis=-1)
