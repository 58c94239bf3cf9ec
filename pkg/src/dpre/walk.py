"""Simple random walk on Z^d: exact kernels, return probabilities, paths.

Positions and displacements use the l1-norm throughout; a step changes
exactly one coordinate by one. Transition probabilities are available two
ways: dense tables from a forward dynamic program (any d up to 3), and
closed forms for d in {1, 2}. The d=2 closed form rotates to independent
diagonal coordinates: u = x + y and v = x - y perform independent 1-d
walks, so p_t(0, (a, b)) factorizes into two binomial terms.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import rng
from .errors import DegenerateInputError, ResourceCapError

_KERNEL_CACHE_ENV = "DPRE_KERNEL_CACHE"
_KERNEL_FORMAT = 1


@dataclass(frozen=True)
class WalkPath:
    """A nearest-neighbor path S_0..S_n; positions as an (n+1, d) array."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.ndim != 2 or pos.shape[1] not in (1, 2, 3):
            raise DegenerateInputError("positions must be (n+1, d), d in 1..3")
        if len(pos) > 1:
            steps = np.abs(np.diff(pos, axis=0)).sum(axis=1)
            if not np.all(steps == 1):
                raise DegenerateInputError("every step must have l1-length 1")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return len(self.positions) - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def start(self):
        return tuple(int(c) for c in self.positions[0])

    def position(self, i: int):
        return tuple(int(c) for c in self.positions[i])


def _unit_steps(d):
    out = []
    for ax in range(d):
        for s in (1, -1):
            e = [0] * d
            e[ax] = s
            out.append(tuple(e))
    return out


@dataclass(frozen=True)
class KernelTable:
    """Dense p_j(0, .) arrays on [-j, j]^d for 1 <= j <= n.

    Mismatched-parity entries are stored as exact zeros. Optionally built
    with a truncation radius for very large horizons; the discarded tail
    mass is accumulated in truncated_mass (0.0 for exact tables).
    """

    d: int
    n: int
    slices: tuple
    truncated_mass: float = 0.0

    def prob(self, j: int, y) -> float:
        """p_j(0, y) for a displacement tuple y."""
        if not (1 <= j <= self.n):
            raise DegenerateInputError(f"horizon {self.n} has no slice {j}")
        arr = self.slices[j - 1]
        half = (arr.shape[0] - 1) // 2
        idx = []
        for c in tuple(y)[::-1]:  # array axes reversed vs coordinates
            if abs(int(c)) > half:
                return 0.0
            idx.append(int(c) + half)
        return float(arr[tuple(idx)])


def build_kernel(d: int, n: int, cap_bytes: int = 256 * 2**20,
                 truncate_radius: int = 0) -> KernelTable:
    """Exact forward DP for p_j(0, .), j = 1..n, with optional disk cache."""
    if d not in (1, 2, 3):
        raise DegenerateInputError(f"dimension {d} unsupported")
    if n < 1:
        raise DegenerateInputError("horizon must be >= 1")
    rad = min(n, truncate_radius) if truncate_radius else n
    est = sum((2 * min(j, rad) + 1) ** d for j in range(1, n + 1)) * 8
    if est > cap_bytes:
        raise ResourceCapError(
            f"kernel table d={d} n={n} needs ~{est} bytes (cap {cap_bytes})"
        )

    cached = _cache_load(d, n, rad)
    if cached is not None:
        return cached

    size = 2 * rad + 1
    cur = np.zeros((size,) * d)
    cur[(rad,) * d] = 1.0
    inv = 1.0 / (2 * d)
    slices = []
    lost = 0.0
    for j in range(1, n + 1):
        nxt = np.zeros_like(cur)
        for ax in range(d):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            nxt[tuple(lo)] += cur[tuple(hi)]
            nxt[tuple(hi)] += cur[tuple(lo)]
        nxt *= inv
        if rad < n:
            lost += 1.0 - float(nxt.sum())
        half = min(j, rad)
        sel = tuple(slice(rad - half, rad + half + 1) for _ in range(d))
        slices.append(nxt[sel].copy())
        cur = nxt
    table = KernelTable(d=d, n=n, slices=tuple(slices),
                        truncated_mass=max(lost, 0.0))
    _cache_store(table, rad)
    return table


def _cache_path(d, n, rad):
    root = os.environ.get(_KERNEL_CACHE_ENV)
    if not root:
        return None
    return os.path.join(root, f"kernel-v{_KERNEL_FORMAT}-d{d}-n{n}-r{rad}.npz")


def _cache_load(d, n, rad):
    path = _cache_path(d, n, rad)
    if path is None or not os.path.exists(path):
        return None
    with np.load(path) as z:
        slices = tuple(z[f"s{j}"] for j in range(n))
        mass = float(z["truncated_mass"])
    return KernelTable(d=d, n=n, slices=slices, truncated_mass=mass)


def _cache_store(table, rad):
    path = _cache_path(table.d, table.n, rad)
    if path is None:
        return
    os.makedirs(os.path.dirname(path), exist_ok=True)
    payload = {f"s{j}": s for j, s in enumerate(table.slices)}
    payload["truncated_mass"] = np.float64(table.truncated_mass)
    np.savez(path, **payload)


def _log_binom(t, k):
    return math.lgamma(t + 1) - math.lgamma(k + 1) - math.lgamma(t - k + 1)


def step_prob_1d(t: int, u: int) -> float:
    """P(1-d SRW is at u after t steps), exact in log-space."""
    if abs(u) > t or (t + u) % 2:
        return 0.0
    return math.exp(_log_binom(t, (t + u) // 2) - t * math.log(2.0))


def point_prob(d: int, t: int, y) -> float:
    """p_t(0, y) in closed form for d in {1, 2}.

    d=2 uses the diagonal factorization p_t(0,(a,b)) = b(t,a+b)*b(t,a-b).
    """
    y = tuple(y)
    if d == 1:
        return step_prob_1d(t, y[0])
    if d == 2:
        a, b = y
        return step_prob_1d(t, a + b) * step_prob_1d(t, a - b)
    raise DegenerateInputError("closed form available for d in {1, 2}")


def return_probability(d: int, i: int) -> float:
    """r_i = P(S_{2i} = 0), closed form for d in {1,2}, table for d=3."""
    if i < 1:
        raise DegenerateInputError("index must be >= 1")
    if d == 1:
        return math.exp(_log_binom(2 * i, i) - 2 * i * math.log(2.0))
    if d == 2:
        r1 = _log_binom(2 * i, i) - 2 * i * math.log(2.0)
        return math.exp(2.0 * r1)
    if d == 3:
        return build_kernel(3, 2 * i).prob(2 * i, (0, 0, 0))
    raise DegenerateInputError(f"dimension {d} unsupported")


def return_probabilities(d: int, imax: int) -> np.ndarray:
    """Vectorized r_1..r_imax (index 0 unused, kept for 1-based renewal)."""
    if d == 3:
        table = build_kernel(3, 2 * imax)
        r = [table.prob(2 * i, (0, 0, 0)) for i in range(1, imax + 1)]
        return np.concatenate([[0.0], r])
    i = np.arange(1, imax + 1, dtype=np.float64)
    log_r1 = (
        np.vectorize(math.lgamma)(2 * i + 1)
        - 2 * np.vectorize(math.lgamma)(i + 1)
        - 2 * i * math.log(2.0)
    )
    r = np.exp(log_r1 if d == 1 else 2.0 * log_r1)
    return np.concatenate([[0.0], r])


def sample_path(d: int, n: int, seed: int, start=None) -> WalkPath:
    """Uniform nearest-neighbor path, deterministic in seed.

    Step i is chosen from the TAG_WALK counter stream at time i, so paths
    of different lengths from the same seed share their common prefix.
    """
    if start is None:
        start = (0,) * d
    steps = _unit_steps(d)
    pos = np.zeros((n + 1, d), dtype=np.int64)
    pos[0] = start
    cur = list(start)
    for i in range(1, n + 1):
        u = float(rng.uniform_at(seed, rng.TAG_WALK, i, 0))
        k = min(int(u * 2 * d), 2 * d - 1)
        dx = steps[k]
        for ax in range(d):
            cur[ax] += dx[ax]
        pos[i] = cur
    return WalkPath(pos)


def overlap_count(a: WalkPath, b: WalkPath) -> int:
    """#{1 <= i <= n : S_i = S'_i}; time 0 is excluded."""
    if a.n != b.n or a.d != b.d:
        raise DegenerateInputError("paths must have equal length and dimension")
    if a.n == 0:
        return 0
    eq = np.all(a.positions[1:] == b.positions[1:], axis=1)
    return int(eq.sum())


def box_hit_prob(kernel: KernelTable, x, N: int, z) -> float:
    """Exact P^x(S_N in B_z^N) from a kernel table of horizon >= N."""
    from .partition import BoxSpec  # deferred: partition imports walk

    if kernel.n < N:
        raise DegenerateInputError(
            f"kernel horizon {kernel.n} < block length {N}"
        )
    spec = BoxSpec(N)
    ranges = spec.box_range(z)
    x = tuple(x)
    arr = kernel.slices[N - 1]
    half = (arr.shape[0] - 1) // 2
    idx = []
    for ax in range(kernel.d):  # array axes reversed vs coordinates
        lo, hi = ranges[kernel.d - 1 - ax]
        lo = max(lo - x[kernel.d - 1 - ax], -half)
        hi = min(hi - x[kernel.d - 1 - ax], half)
        if lo > hi:
            return 0.0
        idx.append(slice(lo + half, hi + half + 1))
    return float(arr[tuple(idx)].sum())
