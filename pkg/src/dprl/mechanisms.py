"""Laplace noise and the Binary Mechanism for continual release of prefix sums.

The Binary Mechanism keeps one noisy partial sum per dyadic interval of the
stream positions ``1..capacity``.  Each interval's noise is drawn once, when
the interval is completed, so released prefix sums never re-randomise.

Error bound
-----------
The release at step k carries the noise of ``popcount(k) <= depth`` nodes,
where ``depth = capacity.bit_length()``.  For a sum of m i.i.d. Laplace(b)
variables we use the tail bound of Chan, Shi & Song (2011, Cor. 2.9)::

    P(|Y| > nu * sqrt(8 ln(2/delta))) <= delta,
    nu = b * max(sqrt(m), sqrt(ln(2/delta)))

and a union bound over the ``capacity`` release times, giving
:func:`bm_error_bound`.
"""
from __future__ import annotations

import math

import numpy as np


def laplace_sample(scale: float, rng: np.random.Generator, size=None):
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    return rng.laplace(0.0, scale, size=size)


def tree_depth(capacity: int) -> int:
    """Number of dyadic levels needed for positions 1..capacity."""
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    return int(capacity).bit_length()


def dyadic_cover(k: int) -> list[tuple[int, int]]:
    """Dyadic intervals (1-based, inclusive) whose union is [1, k]."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    out = []
    start = 1
    for j in range(k.bit_length() - 1, -1, -1):
        if k >> j & 1:
            out.append((start, start + (1 << j) - 1))
            start += 1 << j
    return out


def bm_sensitivity_audit(capacity: int, k: int) -> int:
    """Number of tree nodes (intervals ending by ``capacity``) containing position k."""
    if not 1 <= k <= capacity:
        raise ValueError(f"need 1 <= k <= capacity, got k={k}, capacity={capacity}")
    count = 0
    for j in range(tree_depth(capacity)):
        width = 1 << j
        end = ((k - 1) // width + 1) * width
        if end <= capacity:
            count += 1
    return count


def laplace_sum_tail(scale: float, m: int, delta: float) -> float:
    """High-probability bound on |sum of m i.i.d. Laplace(scale)|, failure prob. delta."""
    log_term = math.log(2.0 / delta)
    nu = scale * max(math.sqrt(m), math.sqrt(log_term))
    return nu * math.sqrt(8.0 * log_term)


def bm_error_bound(capacity: int, eps_prime: float, beta: float) -> float:
    """Bound on max_k |release(k) - prefix(k)| over k <= capacity, w.p. >= 1 - beta."""
    return laplace_sum_tail(1.0 / eps_prime, tree_depth(capacity), beta / capacity)


class BinaryMechanism:
    """Binary Mechanism over an array of independent streams.

    All streams advance in lockstep: :meth:`append` takes an array of shape
    ``shape`` holding the next element of every stream.  With ``shape=()``
    this is a single counter.
    """

    def __init__(self, capacity: int, eps_prime: float, rng: np.random.Generator | None = None,
                 shape: tuple[int, ...] = (), zero_noise: bool = False):
        if not eps_prime > 0:
            raise ValueError(f"eps_prime must be positive, got {eps_prime}")
        if rng is None and not zero_noise:
            raise ValueError("a random generator is required unless zero_noise is set")
        self.capacity = int(capacity)
        self.eps_prime = float(eps_prime)
        self.zero_noise = zero_noise
        self.shape = tuple(shape)
        self.steps = 0
        self._rng = rng
        depth = tree_depth(self.capacity)
        # _alpha[j]: exact sum of the level-j node that is part of the current cover
        self._alpha = np.zeros((depth, *self.shape))
        self._noise = np.zeros((depth, *self.shape))
        self._true_prefix = np.zeros(self.shape)
        self._release = None

    @property
    def scale(self) -> float:
        return 1.0 / self.eps_prime

    def append(self, value) -> None:
        if self.steps >= self.capacity:
            raise RuntimeError(f"Binary Mechanism capacity {self.capacity} exceeded")
        value = np.asarray(value, dtype=float)
        if value.shape != self.shape:
            raise ValueError(f"expected stream values of shape {self.shape}, got {value.shape}")
        self.steps += 1
        t = self.steps
        i = (t & -t).bit_length() - 1
        self._alpha[i] = self._alpha[:i].sum(axis=0) + value
        self._alpha[:i] = 0.0
        self._noise[:i] = 0.0
        if not self.zero_noise:
            self._noise[i] = self._rng.laplace(0.0, self.scale, size=self.shape)
        self._true_prefix = self._true_prefix + value
        bits = [j for j in range(t.bit_length()) if t >> j & 1]
        self._release = (self._alpha[bits] + self._noise[bits]).sum(axis=0)

    def release(self):
        if self.steps == 0:
            raise RuntimeError("release() called before any append()")
        out = self._release
        return float(out) if out.ndim == 0 else out.copy()

    def node_noise(self) -> dict[tuple[int, int], float]:
        """Noise of each node in the current cover of [1, steps] (scalar streams only)."""
        if self.shape:
            raise ValueError("node_noise is only defined for scalar counters")
        cover = dyadic_cover(self.steps) if self.steps else []
        return {iv: float(self._noise[(iv[1] - iv[0] + 1).bit_length() - 1]) for iv in cover}


# module-level spellings of the counter operations

def bm_append(counter: BinaryMechanism, value) -> None:
    counter.append(value)


def bm_release(counter: BinaryMechanism):
    return counter.release()
