"""Log-domain transfer-matrix partition functions and box coarse-graining.

W_n = P_S[exp(beta * H_n - n * lambda(beta))] is computed exactly by a
forward recursion over time slices; everything stays in log scale with a
per-slice max shift, so large beta and long horizons never overflow. The
coarse-grained variant constrains the walk to sit in a prescribed box at
each multiple of the block length and returns -inf when the constraint
empties the slice.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import backends
from .backends import pykernels
from .env import EnvironmentField, EnvironmentModel
from .errors import DegenerateInputError, WindowViolationError
from .walk import WalkPath

_SLICE_MAGIC = b"DPRW"
_SLICE_VERSION = 1


def hamiltonian(field: EnvironmentField, path: WalkPath) -> float:
    """H_n(S) = sum of eta(i, S_i) for i = 1..n along the given path."""
    total = 0.0
    for i in range(1, path.n + 1):
        total += field.eta_at(i, path.position(i))
    return total


@dataclass(frozen=True)
class LogWeightField:
    """Directional weights log W_{n,y} on the dense box [start-n, start+n]^d.

    values has one array axis per coordinate in reversed order (the last
    axis walks the first coordinate); origin[k] is the lattice coordinate
    at index 0 of axis k. Unreachable and wrong-parity sites hold -inf.
    """

    n: int
    start: tuple
    origin: tuple
    values: np.ndarray

    @property
    def d(self) -> int:
        return self.values.ndim

    def site_box(self):
        """Closed per-coordinate (lo, hi) ranges, coordinate order."""
        return tuple((s - self.n, s + self.n) for s in self.start)

    def value_at(self, y) -> float:
        y = tuple(y)
        idx = tuple(
            int(y[self.d - 1 - ax]) - self.origin[ax] for ax in range(self.d)
        )
        if any(i < 0 or i >= self.values.shape[ax] for ax, i in enumerate(idx)):
            return -math.inf
        return float(self.values[idx])

    def log_total(self) -> float:
        finite = self.values[np.isfinite(self.values)]
        if finite.size == 0:
            return -math.inf
        m = float(finite.max())
        return m + math.log(float(np.exp(finite - m).sum()))

    def log_total_box(self, bounds) -> float:
        """log of the weight summed over a closed per-coordinate box,
        (lo, hi) pairs in coordinate order, clipped to the stored slice."""
        idx = []
        for ax in range(self.d):
            lo, hi = bounds[self.d - 1 - ax]
            a = max(int(lo) - self.origin[ax], 0)
            b = min(int(hi) - self.origin[ax], self.values.shape[ax] - 1)
            if a > b:
                return -math.inf
            idx.append(slice(a, b + 1))
        sub = self.values[tuple(idx)]
        finite = sub[np.isfinite(sub)]
        if finite.size == 0:
            return -math.inf
        m = float(finite.max())
        return m + math.log(float(np.exp(finite - m).sum()))


def _check_window(field, beta_model, n, start, t0):
    if field.d != len(start):
        raise DegenerateInputError("start dimension does not match the field")
    box = tuple((s - n, s + n) for s in start)
    if not field.covers(t0 + 1, t0 + n, box):
        raise WindowViolationError(
            f"field window does not cover times {t0 + 1}..{t0 + n} on the "
            f"reachable box around {start}"
        )


def _weight_tables(field, model, beta, n, t0):
    return pykernels.make_tables(
        model, beta, pykernels.MODE_WEIGHT, field.seed,
        tilt=field.tilt, t0=t0, n=n,
    )


def _field_from_slice(n, start, w, logscale, origin):
    with np.errstate(divide="ignore"):
        vals = np.where(w > 0.0, np.log(np.maximum(w, 1e-300)) + logscale,
                        -math.inf)
    return LogWeightField(n=n, start=tuple(start), origin=tuple(origin),
                          values=vals)


def log_partition(field: EnvironmentField, model: EnvironmentModel,
                  beta: float, n: int, start=None, t0: int = 0,
                  masks=None, cap_bytes=None):
    """Exact log W_n and the final slice of directional weights.

    At beta = 0 the weights are identically one and the scalar is pinned
    to exactly 0.0; the per-site values still come from the kernel and
    carry ordinary float rounding.
    """
    if n < 1:
        raise DegenerateInputError("horizon must be >= 1")
    if start is None:
        start = (0,) * field.d
    start = tuple(int(s) for s in start)
    _check_window(field, model, n, start, t0)
    tab = _weight_tables(field, model, beta, n, t0)
    logw, logscale, w, origin = backends.transfer_logw(
        tab, n, field.d, start, t0=t0, masks=masks, cap_bytes=cap_bytes
    )
    lwf = _field_from_slice(n, start, w, logscale, origin)
    if beta == 0.0 and masks is None:
        logw = 0.0
    return logw, lwf


def gibbs_measure(weights: LogWeightField) -> np.ndarray:
    """mu_n over the slice: exp(log W_{n,y} - log W_n); sums to one."""
    total = weights.log_total()
    if total == -math.inf:
        raise DegenerateInputError("all weights are -inf")
    with np.errstate(invalid="ignore"):
        p = np.exp(weights.values - total)
    p[~np.isfinite(weights.values)] = 0.0
    return p


@dataclass(frozen=True)
class BoxSpec:
    """Block geometry: side (2m+1) boxes centered at (2m+1)z, m = floor(sqrt(N))."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise DegenerateInputError("block length must be >= 1")

    @property
    def m(self) -> int:
        return int(math.isqrt(self.N))

    @property
    def side(self) -> int:
        return 2 * self.m + 1

    def box_range(self, z):
        """Closed per-coordinate ranges [(2z-1)m + z, (2z+1)m + z]."""
        m = self.m
        return tuple(
            ((2 * zi - 1) * m + zi, (2 * zi + 1) * m + zi) for zi in z
        )

    def box_of(self, x):
        side = self.side
        m = self.m
        return tuple((int(c) + m) // side for c in x)


def box_distance(spec: BoxSpec, z, z2) -> int:
    """Minimal l1 distance between the boxes of two block indices."""
    total = 0
    for (alo, ahi), (blo, bhi) in zip(spec.box_range(z), spec.box_range(z2)):
        total += max(0, alo - bhi, blo - ahi)
    return total


def point_box_distance(spec: BoxSpec, x, z) -> int:
    """Minimal l1 distance from a lattice point to the box of z."""
    total = 0
    for c, (lo, hi) in zip(x, spec.box_range(z)):
        total += max(0, lo - int(c), int(c) - hi)
    return total


@dataclass(frozen=True)
class BlockPath:
    """A sequence of block indices (z_1..z_n) with per-epoch reachability.

    Each epoch allows at most N l1-steps, so consecutive boxes farther
    apart than N are rejected at construction. Reachability from the walk
    start to the first box depends on the start and is checked where the
    start is known (coarse_partition).
    """

    blocks: tuple
    N: int

    def __post_init__(self):
        blocks = tuple(tuple(int(c) for c in z) for z in self.blocks)
        if not blocks:
            raise DegenerateInputError("block path must be nonempty")
        d = len(blocks[0])
        if any(len(z) != d for z in blocks):
            raise DegenerateInputError("block indices must share a dimension")
        spec = BoxSpec(self.N)
        for a, b in zip(blocks, blocks[1:]):
            if box_distance(spec, a, b) > self.N:
                raise DegenerateInputError(
                    f"blocks {a} -> {b} are not reachable in {self.N} steps"
                )
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return len(self.blocks)


def reachable_blocks(spec: BoxSpec, x, steps: int):
    """All block indices whose box is within `steps` l1-steps of point x."""
    d = len(tuple(x))
    side = spec.side
    lo = [(int(c) - steps + spec.m) // side for c in x]
    hi = [(int(c) + steps + spec.m) // side for c in x]
    out = []

    def rec(prefix, ax):
        if ax == d:
            if point_box_distance(spec, x, tuple(prefix)) <= steps:
                out.append(tuple(prefix))
            return
        for zi in range(lo[ax], hi[ax] + 1):
            rec(prefix + [zi], ax + 1)

    rec([], 0)
    return out


def coarse_partition(field: EnvironmentField, model: EnvironmentModel,
                     beta: float, n: int, N: int, Z: BlockPath,
                     start=None, t0: int = 0, cap_bytes=None) -> float:
    """log of W-hat_Z: the transfer restricted to S_{jN} in B_{z_j} for all j.

    Returns -inf when the constraints empty a slice (infeasible Z for this
    start); that is a value, not an error, so sums over Z skip it.
    """
    if Z.n != n:
        raise DegenerateInputError(f"block path length {Z.n} != n = {n}")
    if Z.N != N:
        raise DegenerateInputError("block path was built for a different N")
    if start is None:
        start = (0,) * field.d
    start = tuple(int(s) for s in start)
    spec = BoxSpec(N)
    if point_box_distance(spec, start, Z.blocks[0]) > N:
        return -math.inf
    steps = n * N
    _check_window(field, model, steps, start, t0)
    masks = {j * N: _mask_bounds(spec.box_range(Z.blocks[j - 1]))
             for j in range(1, n + 1)}
    tab = _weight_tables(field, model, beta, steps, t0)
    logw, _, _, _ = backends.transfer_logw(
        tab, steps, field.d, start, t0=t0, masks=masks, cap_bytes=cap_bytes
    )
    return logw


def _mask_bounds(ranges):
    lo = tuple(r[0] for r in ranges)
    hi = tuple(r[1] for r in ranges)
    return lo, hi


def dump_slice(weights: LogWeightField, path: str) -> None:
    """Debugging dump of a weight slice; not a stable format."""
    with open(path, "wb") as fh:
        fh.write(_SLICE_MAGIC)
        fh.write(struct.pack("<III", _SLICE_VERSION, weights.d, weights.n))
        for lo, hi in weights.site_box():
            fh.write(struct.pack("<qq", lo, hi))
        fh.write(struct.pack("<" + "q" * weights.d, *weights.origin))
        fh.write(weights.values.astype("<f8").tobytes())


def load_slice(path: str) -> LogWeightField:
    with open(path, "rb") as fh:
        if fh.read(4) != _SLICE_MAGIC:
            raise DegenerateInputError("not a weight-slice file")
        version, d, n = struct.unpack("<III", fh.read(12))
        if version != _SLICE_VERSION:
            raise DegenerateInputError(f"unknown slice version {version}")
        box = [struct.unpack("<qq", fh.read(16)) for _ in range(d)]
        origin = struct.unpack("<" + "q" * d, fh.read(8 * d))
        side = 2 * n + 1
        vals = np.frombuffer(fh.read(side ** d * 8), dtype="<f8")
    start = tuple((lo + hi) // 2 for lo, hi in box)
    return LogWeightField(
        n=n, start=start, origin=tuple(origin),
        values=vals.reshape((side,) * d).copy(),
    )
