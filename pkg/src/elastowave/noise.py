"""Counter-based scalar Brownian increments and exact path coarsening.

Step ``s`` of sample ``j`` under master seed ``m`` is computed from the
Philox4x64 block at counter ``s`` with key ``(m, j)``: the first two 64-bit
words go through Box-Muller.  A draw therefore depends only on the triple
``(m, j, s)``, never on generation order or on which worker produced it.

Increments are rounded to the grid ``2**-44``.  Any partial sum of such
numbers below ``2**9`` in magnitude is exact in float64, so block sums do
not depend on summation order and repeated coarsening is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUANTUM = 2.0 ** -44
_U53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class BrownianPath:
    k_fine: float
    increments: np.ndarray = field(repr=False)
    master_seed: int
    sample_index: int

    @property
    def n_steps(self) -> int:
        return self.increments.size

    @property
    def T(self) -> float:
        return self.n_steps * self.k_fine

    def values(self) -> np.ndarray:
        """W at the fine grid points, starting from W(0) = 0."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])


def _key(master_seed: int, sample_index: int) -> int:
    if master_seed < 0 or sample_index < 0:
        raise ValueError("seed and sample index must be nonnegative")
    return (int(master_seed) & _MASK64) | ((int(sample_index) & _MASK64) << 64)


def standard_normals(master_seed: int, sample_index: int, n: int, start: int = 0) -> np.ndarray:
    """Standard normal draws for steps ``start .. start+n-1``."""
    bg = np.random.Philox(key=_key(master_seed, sample_index))
    if start:
        bg.advance(start)
    raw = bg.random_raw(4 * n).reshape(n, 4)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # (0, 1]
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _U53  # [0, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def steps_for(T: float, k: float, tol: float = 1e-9) -> int:
    """Number of steps of size ``k`` in ``[0, T]``; raises if not an integer."""
    if k <= 0 or T <= 0:
        raise ValueError("T and k must be positive")
    ratio = T / k
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > tol:
        raise ValueError(f"T={T} is not an integer multiple of k={k}")
    return n


def quantize(x: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(x) / QUANTUM) * QUANTUM


def generate_path(master_seed: int, sample_index: int, T: float, k_fine: float) -> BrownianPath:
    n = steps_for(T, k_fine)
    z = standard_normals(master_seed, sample_index, n)
    inc = quantize(np.sqrt(k_fine) * z)
    inc.setflags(write=False)
    return BrownianPath(k_fine, inc, int(master_seed), int(sample_index))


def coarsen(path, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments.

    ``path`` may be a :class:`BrownianPath` or an increment array.
    """
    inc = path.increments if isinstance(path, BrownianPath) else np.asarray(path, dtype=float)
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if inc.size % factor:
        raise ValueError(f"factor {factor} does not divide {inc.size} increments")
    blocks = inc.reshape(-1, factor)
    # left-to-right within each block
    out = blocks[:, 0].copy()
    for j in range(1, factor):
        out += blocks[:, j]
    return out
