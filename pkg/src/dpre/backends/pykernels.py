"""Pure-numpy reference kernels.

Everything here is the semantic ground truth for the compiled backend:
same counter-stream draws, same update order, same masking rules. Slabs
are dense arrays over a centered bounding window; 2-d arrays are indexed
[y - y0, x - x0] (row = y), 3-d arrays [z][y][x].

Truncation semantics (chaos/backward kernels): sites outside the working
domain hold 0, so any path term that touches them is dropped exactly.
With the default cap the domain equals the full reachable cone and
nothing is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import rng
from ..errors import ResourceCapError

MODE_ETA = 0
MODE_WEIGHT = 1
MODE_EPS = 2

_EMPTY = np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class FieldTables:
    """Prepared per-call arguments shared by both backends.

    For atom families (rademacher, finite-discrete), `atom_out` holds the
    per-atom output under the requested mode (eta value, e-weight, or
    e-weight minus one) and `atom_cum`/`tilt_cum` the cumulative masses
    used for selection: the drawn atom is the first k with u < cum[k].
    For gaussian-unit the output is computed from the coupling and lam.
    """

    seed: int
    mode: int
    is_gauss: bool
    coupling: float
    lam: float
    atom_out: np.ndarray = _EMPTY
    atom_cum: np.ndarray = _EMPTY
    has_tilt: bool = False
    tilt_shift: float = 0.0
    tilt_cum: np.ndarray = _EMPTY
    tilt_pos: np.ndarray = np.empty((0, 2), dtype=np.int64)  # rows: local times 1..n


def make_tables(model, coupling, mode, seed, tilt=None, t0=0, n=0):
    """Build FieldTables for `model` at inverse temperature `coupling`.

    `tilt` is the field's (path, beta) pair or None; positions are
    resolved for local times 1..n (global t0+1..t0+n).
    """
    from .. import env  # local import: env does not depend on backends

    lam = env.cumulant(model, coupling)
    is_gauss = model.family == env.GAUSSIAN_UNIT
    atom_out = _EMPTY
    atom_cum = _EMPTY
    if not is_gauss:
        if model.family == env.RADEMACHER:
            vals = (1.0, -1.0)
            probs = (0.5, 0.5)
        else:
            vals = model.values
            probs = model.probabilities
        atom_out = np.array([_mode_value(mode, coupling, lam, v) for v in vals])
        atom_cum = np.cumsum(np.asarray(probs, dtype=np.float64))

    has_tilt = tilt is not None
    tilt_shift = 0.0
    tilt_cum = _EMPTY
    tilt_pos = np.empty((0, 2), dtype=np.int64)
    if has_tilt:
        path, tilt_beta = tilt
        law = env.tilted_law(model, tilt_beta)
        if is_gauss:
            tilt_shift = float(tilt_beta)
        elif model.family == env.RADEMACHER:
            tilt_cum = np.array([law.p_plus, 1.0])
        else:
            tilt_cum = np.cumsum(np.asarray(law.probabilities, dtype=np.float64))
        tilt_pos = np.array(
            [path.position(t0 + i) for i in range(1, n + 1)], dtype=np.int64
        ).reshape(n, -1)

    return FieldTables(
        seed=int(seed), mode=mode, is_gauss=is_gauss,
        coupling=float(coupling), lam=float(lam),
        atom_out=atom_out, atom_cum=atom_cum,
        has_tilt=has_tilt, tilt_shift=tilt_shift, tilt_cum=tilt_cum,
        tilt_pos=tilt_pos,
    )


def _mode_value(mode, coupling, lam, eta):
    if mode == MODE_ETA:
        return float(eta)
    if mode == MODE_WEIGHT:
        return math.exp(coupling * eta - lam)
    return math.expm1(coupling * eta - lam)


def _from_uniform(tab, u, tilted):
    if tab.is_gauss:
        g = rng.norm_ppf(u)
        if tilted:
            g = g + tab.tilt_shift
        if tab.mode == MODE_ETA:
            return g
        arg = tab.coupling * g - tab.lam
        return np.exp(arg) if tab.mode == MODE_WEIGHT else np.expm1(arg)
    cum = tab.tilt_cum if tilted else tab.atom_cum
    k = np.searchsorted(cum, u, side="right")
    k = np.minimum(k, len(cum) - 1)
    out = tab.atom_out[k]
    return out


def _slice_values(tab, t, i_local, coord_arrays):
    """Field-derived values on a product grid at global time t.

    coord_arrays are broadcastable per-axis lattice coordinates ordered
    (x, y[, z]); the returned array carries the broadcast shape. The
    tilted site, if any, is overridden in place.
    """
    u = rng.uniform_at(tab.seed, rng.TAG_BASE, t, *coord_arrays)
    vals = np.asarray(_from_uniform(tab, u, tilted=False))
    if tab.has_tilt and 1 <= i_local <= len(tab.tilt_pos):
        pos = tab.tilt_pos[i_local - 1]
        # index tuple ordered by array axes (last axis is the x coordinate)
        idx = []
        inside = True
        for p, cs in zip(pos[::-1], coord_arrays[::-1]):
            flat = cs.reshape(-1)
            lo, hi = int(flat[0]), int(flat[-1])
            if not (lo <= p <= hi):
                inside = False
                break
            idx.append(int(p) - lo)
        if inside:
            u1 = rng.uniform_at(tab.seed, rng.TAG_TILT, t, *[int(c) for c in pos])
            vals[tuple(idx)] = _from_uniform(tab, np.asarray(u1), tilted=True)
    return vals


def _axis_coords(start, i, d):
    """Per-axis coordinate arrays, broadcastable to the (2i+1,)*d window."""
    out = []
    for ax in range(d):  # ax over coordinate order (x, y, z)
        c = np.arange(-i, i + 1, dtype=np.int64) + start[ax]
        shape = [1] * d
        shape[d - 1 - ax] = 2 * i + 1  # x varies along the last array axis
        out.append(c.reshape(shape))
    return out


def _neighbor_sum(w):
    """Sum of the 2d nearest-neighbor translates with zero boundary."""
    nb = np.zeros_like(w)
    d = w.ndim
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        nb[tuple(lo)] += w[tuple(hi)]
        nb[tuple(hi)] += w[tuple(lo)]
    return nb


def transfer_logw(tab, n, d, start, t0=0, masks=None, cap_bytes=None):
    """Log partition function by forward transfer over the diamond.

    masks: optional dict {local time i: (lo tuple, hi tuple)} of closed
    lattice boxes; after completing step i the weight outside the box is
    zeroed. Returns (logw, logscale, final_weights, origin) where
    final_weights is the max-normalized linear slice over [-n, n]^d
    around `start` and origin gives the lattice coordinate of index 0
    per array axis (reversed coordinate order).
    """
    cap = cap_bytes if cap_bytes is not None else 256 * 2**20
    cells = (2 * n + 1) ** d
    if 3 * cells * 8 > cap:
        raise ResourceCapError(
            f"transfer slab {d}d horizon {n} needs {3 * cells * 8} bytes"
        )
    masks = masks or {}
    shape = (2 * n + 1,) * d
    w = np.zeros(shape)
    center = (n,) * d
    w[center] = 1.0
    logscale = 0.0
    inv = 1.0 / (2 * d)
    for i in range(1, n + 1):
        nb = _neighbor_sum(w) * inv
        sub = tuple(slice(n - i, n + i + 1) for _ in range(d))
        vals = _slice_values(tab, t0 + i, i, _axis_coords(start, i, d))
        w = np.zeros(shape)
        w[sub] = nb[sub] * vals
        if i in masks:
            lo, hi = masks[i]
            keep = np.zeros(shape)
            box = tuple(
                slice(max(0, lo[d - 1 - ax] - start[d - 1 - ax] + n),
                      max(0, hi[d - 1 - ax] - start[d - 1 - ax] + n + 1))
                for ax in range(d)
            )
            keep[box] = w[box]
            w = keep
        m = w.max()
        if m <= 0.0:
            return -math.inf, -math.inf, w, tuple(s - n for s in start[::-1])
        w /= m
        logscale += math.log(m)
    total = float(w.sum())
    logw = logscale + math.log(total)
    return logw, logscale, w, tuple(s - n for s in start[::-1])


def _box_domain_bounds(box, reach):
    """Bounding window of the box dilated by l1-radius `reach`."""
    (xlo, xhi), (ylo, yhi) = box
    return (xlo - reach, xhi + reach), (ylo - reach, yhi + reach)


def _l1_dist_grid(box, win):
    """Grid of l1 distances from each window site to the box."""
    (xlo, xhi), (ylo, yhi) = box
    (wxlo, wxhi), (wylo, wyhi) = win
    xs = np.arange(wxlo, wxhi + 1)
    ys = np.arange(wylo, wyhi + 1)
    dx = np.maximum(0, np.maximum(xlo - xs, xs - xhi))[None, :]
    dy = np.maximum(0, np.maximum(ylo - ys, ys - yhi))[:, None]
    return dx + dy


def chaos_orders(tab, q, N, box, t0=0, cap=None):
    """Backward marks DP: order-k chaos sums over the starting box.

    Returns an array S of length q+1 with S[k] = sum over x in box of
    G_k(0, x), where G_k collects all k-mark products over times
    (t0, t0+N]. S[0] equals the box cardinality. `cap` truncates the
    working domain to l1-distance cap from the box (default N: exact).
    """
    reach = N if cap is None else min(int(cap), N)
    win = _box_domain_bounds(box, reach)
    (wxlo, wxhi), (wylo, wyhi) = win
    ny, nx = wyhi - wylo + 1, wxhi - wxlo + 1
    xs = np.arange(wxlo, wxhi + 1, dtype=np.int64)[None, :]
    ys = np.arange(wylo, wyhi + 1, dtype=np.int64)[:, None]

    dist = _l1_dist_grid(box, win)
    G = np.zeros((q + 1, ny, nx))
    G[0] = (dist <= min(N, reach)).astype(float)
    for j in range(N - 1, -1, -1):
        inside = dist <= min(j, reach)
        eps = _slice_values(tab, t0 + j + 1, j + 1, (xs, ys))
        eps = np.where(dist <= min(j + 1, reach), eps, 0.0)
        newG = np.zeros_like(G)
        newG[0] = inside.astype(float)
        for k in range(1, q + 1):
            term = G[k] + eps * G[k - 1]
            newG[k] = 0.25 * _neighbor_sum(term)
            newG[k][~inside] = 0.0
        G = newG
    (bxlo, bxhi), (bylo, byhi) = box
    sel = (slice(bylo - wylo, byhi - wylo + 1), slice(bxlo - wxlo, bxhi - wxlo + 1))
    return np.array([float(G[k][sel].sum()) for k in range(q + 1)])


def backward_product(tab, N, box, t0=0, cap=None):
    """Full-product backward run: W^y over all starts y in the box.

    h(N, .) = 1 on the domain; h(j, y) = mean over neighbors of
    e(j+1, y') h(j+1, y'). Returns (sum over box of h(0, y), box size).
    The tab must be in MODE_WEIGHT.
    """
    reach = N if cap is None else min(int(cap), N)
    win = _box_domain_bounds(box, reach)
    (wxlo, wxhi), (wylo, wyhi) = win
    xs = np.arange(wxlo, wxhi + 1, dtype=np.int64)[None, :]
    ys = np.arange(wylo, wyhi + 1, dtype=np.int64)[:, None]
    dist = _l1_dist_grid(box, win)
    h = (dist <= min(N, reach)).astype(float)
    for j in range(N - 1, -1, -1):
        e = _slice_values(tab, t0 + j + 1, j + 1, (xs, ys))
        e = np.where(dist <= min(j + 1, reach), e, 0.0)
        h = 0.25 * _neighbor_sum(e * h)
        h[dist > min(j, reach)] = 0.0
    (bxlo, bxhi), (bylo, byhi) = box
    sel = (slice(bylo - wylo, byhi - wylo + 1), slice(bxlo - wxlo, bxhi - wxlo + 1))
    return float(h[sel].sum()), (bxhi - bxlo + 1) * (byhi - bylo + 1)


def renewal_sum(lam1, first, r):
    """Renewal recursion z_n = lam1*(first_n + sum_{m>=1} z_m r_{n-m}).

    first and r are 1-indexed sequences given as arrays with index 0
    unused; returns the full z array (z[0] = 1 by convention, excluded
    from the recursion's inhomogeneous term, which is first[n] itself).
    Accumulation in extended precision: near the boundedness threshold
    the partial sums cancel to several digits.
    """
    N = len(r) - 1
    z = np.zeros(N + 1, dtype=np.longdouble)
    z[0] = 1.0
    fl = np.asarray(first, dtype=np.longdouble)
    rl = np.asarray(r, dtype=np.longdouble)
    for n in range(1, N + 1):
        acc = fl[n]
        if n > 1:
            acc = acc + np.dot(z[1:n], rl[1:n][::-1])
        z[n] = lam1 * acc
    return np.asarray(z, dtype=np.float64)


def eta_block(tab, t0, n, box):
    """Raw field values on a rectangular window for local times 1..n.

    Returns an array of shape (n, ny, nx) for d=2 (or (n, nx) for d=1):
    block[i-1] is the slice at global time t0+i.
    """
    d = len(box)
    axes = []
    for ax in range(d):
        lo, hi = box[ax]
        c = np.arange(lo, hi + 1, dtype=np.int64)
        shape = [1] * d
        shape[d - 1 - ax] = hi - lo + 1
        axes.append(c.reshape(shape))
    out = []
    for i in range(1, n + 1):
        out.append(np.asarray(_slice_values(tab, t0 + i, i, tuple(axes)), dtype=float))
    return np.stack(out)


def coincidence_forward(path, w):
    """E over an independent walk S' (same start) of w^(#coincidences).

    path: (N+1, 2) integer positions S_0..S_N of the fixed walk; w > 0.
    Exact forward DP over the diamond with per-slice max rescaling.
    """
    path = np.asarray(path, dtype=np.int64)
    N = len(path) - 1
    x0, y0 = path[0]
    size = 2 * N + 1
    u = np.zeros((size, size))
    u[N, N] = 1.0
    logscale = 0.0
    for i in range(1, N + 1):
        u = 0.25 * _neighbor_sum(u)
        px, py = path[i] - (x0 - N, y0 - N)
        if 0 <= py < size and 0 <= px < size:
            u[py, px] *= w
        m = u.max()
        u /= m
        logscale += math.log(m)
    return math.exp(logscale + math.log(float(u.sum())))


def coincidence_backward(path, w, box):
    """E_y[w^(#coincidences with the fixed path)] summed over box starts.

    Backward DP; coincidence at times 1..N. Returns (sum over y in box
    of E_y[w^I], box size).
    """
    path = np.asarray(path, dtype=np.int64)
    N = len(path) - 1
    (bxlo, bxhi), (bylo, byhi) = box
    win = _box_domain_bounds(box, N)
    (wxlo, wxhi), (wylo, wyhi) = win
    ny, nx = wyhi - wylo + 1, wxhi - wxlo + 1
    b = np.ones((ny, nx))
    logscale = 0.0
    for j in range(N - 1, -1, -1):
        marked = b.copy()
        px, py = path[j + 1] - (wxlo, wylo)
        if 0 <= py < ny and 0 <= px < nx:
            marked[py, px] *= w
        b = 0.25 * _neighbor_sum(marked)
        m = b.max()
        b /= m
        logscale += math.log(m)
    sel = (slice(bylo - wylo, byhi - wylo + 1), slice(bxlo - wxlo, bxhi - wxlo + 1))
    total = math.exp(logscale + math.log(float(b[sel].sum())))
    return total, (bxhi - bxlo + 1) * (byhi - bylo + 1)
