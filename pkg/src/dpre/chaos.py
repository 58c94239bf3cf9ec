"""Chaos statistics, penalties, path statistics, and tilted-measure means.

A^{q,N} collects the order-q terms of the polynomial chaos expansion of a
block partition function in the centered weights e - 1 at coupling
gamma_N = gamma_hat / sqrt(log N). The marks dynamic program evaluates
every order up to q in one backward sweep over the block window. The
tilted measure Q_S reweights the environment along a fixed path S; its
effect on means factors into closed cumulant expressions, which is what
the identity Q_S[A] = sqrt(log N) * Lambda_3^q * X verifies numerically.

V^N extends A^{1,N} with the full (not centered-product) weight and has
an exact second moment through the same renewal recursion as Q[W^2],
because the difference of two independent walks observed at time i has
the law of a single walk at time 2i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backends, env, rng
from .backends import pykernels
from .errors import DegenerateInputError, ResourceCapError, WindowViolationError
from .moments import dnq, lambda1
from .partition import BoxSpec, point_box_distance
from .records import EstimateRecord
from .walk import KernelTable, WalkPath, return_probabilities, sample_path

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChaosParams:
    """Parameters of the chaos statistic and its penalty machinery."""

    q: int
    gamma_hat: float
    N: int
    block: tuple = (0, 0)
    K: float = 5.0
    C1: float = 2.0
    C2: float = 4.0
    theta: float = 0.5

    def __post_init__(self):
        if not 1 <= self.q <= 5:
            raise DegenerateInputError("chaos order q must be in 1..5")
        if self.N < 2:
            raise DegenerateInputError("block length must be >= 2")
        if self.gamma_hat < 0:
            raise DegenerateInputError("gamma_hat must be >= 0")
        if self.K <= 0 or self.C1 <= 0 or self.C2 < 0:
            raise DegenerateInputError("K and C1 must be positive, C2 >= 0")
        if not 0.0 < self.theta < 1.0:
            raise DegenerateInputError("theta must be in (0,1)")
        object.__setattr__(self, "block",
                           tuple(int(z) for z in self.block))

    @property
    def d(self) -> int:
        return len(self.block)

    @property
    def gamma_N(self) -> float:
        return self.gamma_hat / math.sqrt(math.log(self.N))

    def box(self):
        return BoxSpec(self.N).box_range(self.block)

    def coupled_beta(self) -> float:
        """beta = C1 * (log N)^(-(q-1)/(2q)), the tilt coupling of the
        blocked scheme; constant C1 when q = 1."""
        expo = (self.q - 1) / (2.0 * self.q)
        return self.C1 * math.log(self.N) ** (-expo)


@dataclass(frozen=True)
class TiltedMeasureSpec:
    """The conditioning path S and coupling beta defining Q_S."""

    path: WalkPath
    beta: float

    @property
    def pair(self):
        return (self.path, self.beta)


@dataclass(frozen=True)
class ChaosConstants:
    """Cumulant combinations the variance bound is built from."""

    lambda2_pair: float
    lambda3_cross: float
    m_on: float
    ehat2_on: float
    ehat2_off: float


def chaos_constants(model: env.EnvironmentModel, gamma_N: float,
                    beta: float) -> ChaosConstants:
    lam = lambda b: env.cumulant(model, b)
    l3 = math.expm1(lam(gamma_N + beta) - lam(gamma_N) - lam(beta))
    l2 = math.expm1(lam(2 * gamma_N + beta) - 2 * lam(gamma_N) - lam(beta))
    on = (l2 + 1.0) - (1.0 + l3) ** 2
    off = math.expm1(lam(2 * gamma_N) - 2 * lam(gamma_N))
    return ChaosConstants(
        lambda2_pair=l2, lambda3_cross=l3, m_on=l3,
        ehat2_on=on, ehat2_off=off,
    )


def _chaos_window(params: ChaosParams, ell: int, cap):
    reach = params.N if cap is None else min(params.N, int(cap))
    dilated = tuple((lo - reach, hi + reach) for lo, hi in params.box())
    return ell * params.N, dilated


def chaos_statistic(field: env.EnvironmentField, params: ChaosParams,
                    ell: int = 0, cap=None) -> float:
    """A_ell^{q,N} = (sqrt(log N)/N) * sum over x in the block box of
    G_q(ell*N, x), exact unless a truncation cap is given."""
    return float(chaos_all_orders(field, params, ell=ell, cap=cap)[-1])


def chaos_all_orders(field: env.EnvironmentField, params: ChaosParams,
                     ell: int = 0, cap=None) -> np.ndarray:
    """A_ell^{k,N} for k = 1..q; the sweep yields every order at once."""
    if field.d != params.d:
        raise DegenerateInputError("field and params dimensions differ")
    t0, dilated = _chaos_window(params, ell, cap)
    if not field.covers(t0 + 1, t0 + params.N, dilated):
        raise WindowViolationError(
            f"field does not cover block epoch {ell} of length {params.N}"
        )
    if params.gamma_hat == 0.0:
        return np.zeros(params.q)
    tab = pykernels.make_tables(
        field.model, params.gamma_N, pykernels.MODE_EPS, field.seed,
        tilt=field.tilt, t0=t0, n=params.N,
    )
    sums = backends.chaos_orders(tab, params.q, params.N, params.box(),
                                 t0=t0, cap=cap)
    scale = math.sqrt(math.log(params.N)) / params.N
    return scale * np.asarray(sums[1:], dtype=np.float64)


def _field_for_block(model, params, seed, ell=0, cap=None, tilt=None):
    t0, dilated = _chaos_window(params, ell, cap)
    return env.EnvironmentField(
        model=model, seed=seed, time_range=(t0 + 1, t0 + params.N),
        spatial_box=dilated, tilt=tilt,
    )


def _chaos_samples(model, params, M, seed, tilt=None, ell=0, cap=None):
    out = np.empty(M)
    for k in range(M):
        field = _field_for_block(model, params, rng.task_seed(seed, k),
                                 ell=ell, cap=cap, tilt=tilt)
        out[k] = chaos_statistic(field, params, ell=ell, cap=cap)
    return out


def chaos_second_moment_mc(model: env.EnvironmentModel, params: ChaosParams,
                           M: int, seed: int, cap=None) -> EstimateRecord:
    """Monte Carlo Q[A^2] with the sample mean of A carried alongside."""
    if M < 100:
        raise DegenerateInputError("need at least 100 samples")
    if params.gamma_hat == 0.0:
        a = np.zeros(M)
    else:
        a = _chaos_samples(model, params, M, seed, cap=cap)
    sq = a * a
    return EstimateRecord(
        name="chaos_second_moment",
        value=float(sq.mean()),
        std_error=float(sq.std(ddof=1)) / math.sqrt(M),
        n_samples=M,
        extra={
            "q": params.q, "N": params.N, "gamma_hat": params.gamma_hat,
            "seed": seed, "mean_A": float(a.mean()),
            "se_A": float(a.std(ddof=1)) / math.sqrt(M),
            "cap": cap,
        },
    )


def penalty(x: float, K: float) -> float:
    """f_K(x) = -K on {x > exp(K^2)}, zero otherwise (strict inequality)."""
    return -K if x > math.exp(K * K) else 0.0


def g_product(values, K: float) -> float:
    """g = exp(sum of f_K over block statistics); lies in (0, 1]."""
    return math.exp(math.fsum(penalty(v, K) for v in values))


def penalty_cost_factor(model: env.EnvironmentModel, params: ChaosParams,
                        M: int, seed: int, cap=None) -> EstimateRecord:
    """Monte Carlo Q[exp(-theta/(1-theta) * f_K(A))], the per-block
    Holder cost of inserting the penalty; should be <= 2 for large K."""
    t = params.theta / (1.0 - params.theta)
    if params.gamma_hat == 0.0:
        vals = np.ones(M)
        fired = 0.0
    else:
        a = _chaos_samples(model, params, M, seed, cap=cap)
        f = np.where(a > math.exp(params.K ** 2), -params.K, 0.0)
        vals = np.exp(-t * f)
        fired = float((f < 0).mean())
    mean = float(vals.mean())
    return EstimateRecord(
        name="penalty_cost_factor",
        value=mean,
        std_error=float(vals.std(ddof=1)) / math.sqrt(M),
        n_samples=M,
        extra={
            "K": params.K, "theta": params.theta, "fire_fraction": fired,
            "bound_ok": bool(mean <= 2.0), "q": params.q, "N": params.N,
            "gamma_hat": params.gamma_hat, "seed": seed,
        },
    )


_lf = np.zeros(1)


def _log_factorials(n: int) -> np.ndarray:
    """lf[k] = log k! for k = 0..n, grown on demand."""
    global _lf
    if len(_lf) <= n:
        ks = np.arange(len(_lf), n + 1, dtype=np.float64)
        _lf = np.concatenate([_lf, _lf[-1] + np.cumsum(np.log(ks))])
    return _lf


def _b1(t: int, u: int, lf) -> float:
    if abs(u) > t or (t + u) % 2:
        return 0.0
    return math.exp(lf[t] - lf[(t + u) // 2] - lf[(t - u) // 2] - t * _LN2)


def _point2(t: int, dx: int, dy: int, lf) -> float:
    return _b1(t, dx + dy, lf) * _b1(t, dx - dy, lf)


def _b1_grid(t: int, u: np.ndarray, lf) -> np.ndarray:
    ok = (np.abs(u) <= t) & ((t + u) % 2 == 0)
    safe = np.where(ok, u, t & ~1)
    out = np.exp(lf[t] - lf[(t + safe) // 2] - lf[(t - safe) // 2]
                 - t * _LN2)
    return np.where(ok, out, 0.0)


def _path_kernel(path, t1, t2, lf, kernel):
    dx = path.position(t2)[0] - path.position(t1)[0]
    dy = path.position(t2)[1] - path.position(t1)[1]
    if kernel is not None:
        return kernel.prob(t2 - t1, (dx, dy))
    return _point2(t2 - t1, dx, dy, lf)


def x_statistic(path: WalkPath, q: int, N: int, kernel: KernelTable = None,
                verbatim: bool = False) -> float:
    """X along a fixed path: first kernel from each box point y to S_j1,
    then gap kernels between consecutive visited points.

    verbatim=True anchors the first factor at S_0 instead and multiplies
    by the box size, which is the displayed form with the unused box sum;
    kept only for comparison.
    """
    if path.d != 2 and kernel is None:
        raise DegenerateInputError("closed-form kernels cover d = 2 only")
    if path.n < N:
        raise DegenerateInputError("path shorter than the horizon")
    if kernel is not None and kernel.n < N:
        raise DegenerateInputError(
            f"kernel horizon {kernel.n} < N = {N}"
        )
    if not 1 <= q <= 5:
        raise DegenerateInputError("order q must be in 1..5")
    lf = _log_factorials(2 * N + 2)
    box = BoxSpec(N).box_range((0, 0))
    (xlo, xhi), (ylo, yhi) = box
    xs = np.arange(xlo, xhi + 1)
    ys = np.arange(ylo, yhi + 1)
    t1 = np.zeros(N + 1)
    if verbatim:
        nbox = len(xs) * len(ys)
        for t in range(1, N + 1):
            t1[t] = nbox * _path_kernel(path, 0, t, lf, kernel)
    else:
        for t in range(1, N + 1):
            sx, sy = path.position(t)
            u = (sx - xs)[None, :] + (sy - ys)[:, None]
            v = (sx - xs)[None, :] - (sy - ys)[:, None]
            if kernel is not None:
                acc = 0.0
                for yy in ys:
                    for xx in xs:
                        acc += kernel.prob(t, (sx - xx, sy - yy))
                t1[t] = acc
            else:
                t1[t] = float((_b1_grid(t, u, lf) * _b1_grid(t, v, lf)).sum())
    tk = t1
    for _ in range(q - 1):
        nxt = np.zeros(N + 1)
        for t in range(2, N + 1):
            acc = 0.0
            for tp in range(1, t):
                w = tk[tp]
                if w != 0.0:
                    acc += w * _path_kernel(path, tp, t, lf, kernel)
            nxt[t] = acc
        tk = nxt
    return float(tk[1:].sum()) / N


def l_statistic(path: WalkPath, q: int, N: int, C2: float,
                x=None) -> float:
    """L along a fixed path: gap weights 1/(t - t') gated by the
    diffusive-window indicator |S_t - S_t'| <= C2 * sqrt(t - t')."""
    if not 1 <= q <= 5:
        raise DegenerateInputError("order q must be in 1..5")
    if path.n < N:
        raise DegenerateInputError("path shorter than the horizon")
    if C2 < 0:
        raise DegenerateInputError("C2 must be >= 0")
    if x is not None and tuple(x) != path.start:
        raise DegenerateInputError("x must be the path start")
    if q == 1:
        return 1.0
    pos = path.positions[: N + 1].astype(np.float64)
    dist = np.abs(pos[:, None, :] - pos[None, :, :]).sum(axis=2)
    t = np.arange(N + 1, dtype=np.float64)
    gap = t[:, None] - t[None, :]  # gap[t, t'] = t - t'
    with np.errstate(divide="ignore", invalid="ignore"):
        if math.isinf(C2):
            fire = gap > 0
        else:
            fire = (gap > 0) & (dist <= C2 * np.sqrt(np.maximum(gap, 0.0)))
        w = np.where(fire, 1.0 / np.where(gap > 0, gap, 1.0), 0.0)
    u = np.ones(N + 1)
    u[0] = 0.0
    for _ in range(q - 1):
        u = w @ u
        u[0] = 0.0
    return float(u[1:].sum()) / N


def calibrate_c2(q: int, N: int, n_walks: int, seed: int,
                 grid=(1.0, 2.0, 4.0, 8.0), target: float = 0.9):
    """Scan the diffusive-window constant and pick the smallest value
    for which L >= D/2 holds on at least `target` of sampled walks.

    Returns (best_c2, table) where table maps each grid value to the
    observed fraction. best_c2 is None when no grid value reaches the
    target.
    """
    if n_walks < 1:
        raise DegenerateInputError("need at least one walk")
    half = dnq(N, q) / 2.0
    counts = {float(c): 0 for c in grid}
    for k in range(n_walks):
        path = sample_path(2, N, seed=rng.task_seed(seed, k))
        for c in counts:
            if l_statistic(path, q, N, c) >= half:
                counts[c] += 1
    table = {c: counts[c] / n_walks for c in counts}
    best = None
    for c in sorted(table):
        if table[c] >= target:
            best = c
            break
    return best, table


def tilted_chaos_mean_formula(model: env.EnvironmentModel,
                              params: ChaosParams, path: WalkPath,
                              beta: float = None) -> float:
    """Q_S[A_0^{q,N}] = sqrt(log N) * Lambda_3^q * X in closed form."""
    if beta is None:
        beta = params.coupled_beta()
    if params.gamma_hat == 0.0:
        return 0.0
    lam3 = chaos_constants(model, params.gamma_N, beta).lambda3_cross
    x = x_statistic(path, params.q, params.N)
    return math.sqrt(math.log(params.N)) * lam3 ** params.q * x


def tilted_chaos_mean_mc(model: env.EnvironmentModel, params: ChaosParams,
                         path: WalkPath, M: int, seed: int,
                         beta: float = None, cap=None) -> EstimateRecord:
    """Sample mean of A under Q_S via tilted environments."""
    if beta is None:
        beta = params.coupled_beta()
    if path.n < params.N:
        raise DegenerateInputError("tilt path shorter than the block")
    a = _chaos_samples(model, params, M, seed, tilt=(path, beta), cap=cap)
    return EstimateRecord(
        name="tilted_chaos_mean",
        value=float(a.mean()),
        std_error=float(a.std(ddof=1)) / math.sqrt(M),
        n_samples=M,
        extra={
            "q": params.q, "N": params.N, "gamma_hat": params.gamma_hat,
            "beta": beta, "seed": seed, "cap": cap,
        },
    )


def tilted_chaos_variance_mc(model: env.EnvironmentModel,
                             params: ChaosParams, path: WalkPath, M: int,
                             seed: int, beta: float = None,
                             cap=None) -> EstimateRecord:
    """Sample variance of A under Q_S; it vanishes as N grows."""
    if M < 100:
        raise DegenerateInputError("need at least 100 samples")
    if beta is None:
        beta = params.coupled_beta()
    if params.gamma_hat == 0.0:
        a = np.zeros(M)
    else:
        a = _chaos_samples(model, params, M, seed, tilt=(path, beta),
                           cap=cap)
    var = float(a.var(ddof=1))
    return EstimateRecord(
        name="tilted_chaos_variance",
        value=var,
        std_error=var * math.sqrt(2.0 / (M - 1)),
        n_samples=M,
        extra={
            "q": params.q, "N": params.N, "gamma_hat": params.gamma_hat,
            "beta": beta, "seed": seed, "mean_A": float(a.mean()),
            "cap": cap,
        },
    )


def v_statistic(field: env.EnvironmentField, gamma_hat: float, N: int,
                method: str = "backward", cap=None) -> float:
    """V^N = (sqrt(log N)/N) * sum over y in the box of (W_N^y - 1).

    backward runs one adjoint sweep covering every start; forward runs
    one transfer per start. They agree to float resolution and the
    forward route exists as the cross-check.
    """
    if N < 2:
        raise DegenerateInputError("N must be >= 2")
    if field.d != 2:
        raise DegenerateInputError("V statistic is defined on d = 2")
    if gamma_hat == 0.0:
        return 0.0
    gamma_N = gamma_hat / math.sqrt(math.log(N))
    box = BoxSpec(N).box_range((0, 0))
    reach = N if cap is None else min(N, int(cap))
    dilated = tuple((lo - reach, hi + reach) for lo, hi in box)
    if not field.covers(1, N, dilated):
        raise WindowViolationError("field does not cover the V window")
    tab = pykernels.make_tables(field.model, gamma_N, pykernels.MODE_WEIGHT,
                                field.seed, tilt=field.tilt, t0=0, n=N)
    scale = math.sqrt(math.log(N)) / N
    if method == "backward":
        total, size = backends.backward_product(tab, N, box, t0=0, cap=cap)
        return scale * (total - size)
    if method == "forward":
        acc = 0.0
        count = 0
        for yy in range(box[1][0], box[1][1] + 1):
            for xx in range(box[0][0], box[0][1] + 1):
                logw, _, _, _ = backends.transfer_logw(
                    tab, N, 2, (xx, yy), t0=0
                )
                acc += math.exp(logw)
                count += 1
        return scale * (acc - count)
    raise DegenerateInputError(f"unknown method {method!r}")


V_SECOND_MOMENT_CAP = 2 ** 12


def _box_autocorrelation(side: int):
    """c(x) = #{(y', y'') in B^2 : y' - y'' = x}, separable per axis."""
    k = np.arange(-(side - 1), side)
    cx = (side - np.abs(k)).astype(np.float64)
    return k, cx


def v_second_moment_exact(model: env.EnvironmentModel, gamma_hat: float,
                          N: int, cap: int = V_SECOND_MOMENT_CAP) -> float:
    """Exact Q[(V^N)^2] = (log N/N^2) * sum over start pairs of
    (E[(1+Lambda_1)^{#coincidences}] - 1), by renewal over the
    difference walk (which moves like a simple walk run at double speed).
    """
    if N < 2:
        raise DegenerateInputError("N must be >= 2")
    if N > cap:
        raise ResourceCapError(f"exact V second moment capped at N = {cap}")
    if gamma_hat == 0.0:
        return 0.0
    gamma_N = gamma_hat / math.sqrt(math.log(N))
    lam1 = lambda1(model, gamma_N)
    side = BoxSpec(N).side
    k, cx = _box_autocorrelation(side)
    weight = cx[None, :] * cx[:, None]
    u = k[None, :] + k[:, None]
    v = k[None, :] - k[:, None]
    lf = _log_factorials(2 * N + 2)
    first = np.zeros(N + 1)
    r = np.zeros(N + 1)
    for n in range(1, N + 1):
        pn = _b1_grid(2 * n, u, lf) * _b1_grid(2 * n, v, lf)
        first[n] = float((weight * pn).sum())
        r[n] = _b1(2 * n, 0, lf) ** 2
    z = backends.renewal_sum(lam1, first, r)
    return math.log(N) / N ** 2 * float(math.fsum(z[1:]))


_DIFF_MOVES = [
    ((0, 0), 0.25),
    ((2, 0), 0.0625), ((-2, 0), 0.0625), ((0, 2), 0.0625), ((0, -2), 0.0625),
    ((1, 1), 0.125), ((1, -1), 0.125), ((-1, 1), 0.125), ((-1, -1), 0.125),
]


def _v_second_moment_dp(model, gamma_hat, N):
    """Small-N oracle for the renewal route: forward distribution of the
    difference walk with a multiplicative bump at each visit to zero."""
    gamma_N = gamma_hat / math.sqrt(math.log(N))
    w = 1.0 + lambda1(model, gamma_N)
    side = BoxSpec(N).side
    half = (side - 1) + 2 * N
    size = 2 * half + 1
    u = np.zeros((size, size))
    k, cx = _box_autocorrelation(side)
    u[np.ix_(k + half, k + half)] = cx[:, None] * cx[None, :]
    total_pairs = float(u.sum())
    for _ in range(N):
        nxt = np.zeros_like(u)
        for (dx, dy), p in _DIFF_MOVES:
            src = (slice(max(0, -dy), size - max(0, dy)),
                   slice(max(0, -dx), size - max(0, dx)))
            dst = (slice(max(0, dy), size - max(0, -dy)),
                   slice(max(0, dx), size - max(0, -dx)))
            nxt[dst] += p * u[src]
        nxt[half, half] *= w
        u = nxt
    return math.log(N) / N ** 2 * (float(u.sum()) - total_pairs)


@dataclass(frozen=True)
class VTiltedResult:
    """Normalized lower-bound value and the raw coincidence expectation."""

    value: float
    raw: float
    w: float


def _coincidence_weight(model, beta_hat, gamma_hat, N):
    """Per-coincidence weight w = exp(lambda(g+b) - lambda(g) - lambda(b))
    at gamma_N = gamma_hat/sqrt(log N) and the pair-coupled
    beta_N = beta_hat*(log N)^(-1/4), matching the tilt normalization used
    by the chaos statistics at q = 2. With this choice
    (w - 1)*log N ~ gamma_hat*beta_hat*lambda''(0)*(log N)^(1/4) exceeds
    pi*lambda''(0) for moderate N, the regime where the tilted mean of V^N
    grows."""
    beta_N = beta_hat * math.log(N) ** -0.25
    gamma_N = gamma_hat / math.sqrt(math.log(N))
    lam = lambda b: env.cumulant(model, b)
    return math.exp(lam(gamma_N + beta_N) - lam(gamma_N) - lam(beta_N))


def v_tilted_mean(model: env.EnvironmentModel, beta_hat: float,
                  gamma_hat: float, N: int, path: WalkPath) -> VTiltedResult:
    """Path-anchored lower bound on Q_S[V^N]: the expectation over an
    independent walk S' from the same start of w^{#coincidences with S},
    returned as (log N/N) * (E - 1) together with the raw E."""
    if path.n < N:
        raise DegenerateInputError("path shorter than the horizon")
    if path.d != 2:
        raise DegenerateInputError("defined on d = 2")
    if point_box_distance(BoxSpec(N), path.start, (0,) * path.d) > 0:
        raise DegenerateInputError("path must start inside the center box")
    w = _coincidence_weight(model, beta_hat, gamma_hat, N)
    raw = pykernels.coincidence_forward(path.positions[: N + 1], w)
    return VTiltedResult(value=math.log(N) / N * (raw - 1.0), raw=raw, w=w)


def v_tilted_mean_full(model: env.EnvironmentModel, beta_hat: float,
                       gamma_hat: float, N: int,
                       path: WalkPath) -> float:
    """Q_S[V^N] itself: every start y in the box, one adjoint sweep."""
    if path.n < N:
        raise DegenerateInputError("path shorter than the horizon")
    w = _coincidence_weight(model, beta_hat, gamma_hat, N)
    box = BoxSpec(N).box_range((0, 0))
    total, size = pykernels.coincidence_backward(path.positions[: N + 1],
                                                 w, box)
    return math.sqrt(math.log(N)) / N * (total - size)


def v_tilted_mean_expected(model: env.EnvironmentModel, beta_hat: float,
                           gamma_hat: float, N: int) -> VTiltedResult:
    """The same quantity averaged over both walks: renewal again, with
    Lambda_1 replaced by w - 1."""
    w = _coincidence_weight(model, beta_hat, gamma_hat, N)
    r = return_probabilities(2, N)
    z = backends.renewal_sum(w - 1.0, r, r)
    raw = float(math.fsum(z))
    return VTiltedResult(value=math.log(N) / N * (raw - 1.0), raw=raw, w=w)


def v_tilted_mean_annealed(model: env.EnvironmentModel, beta_hat: float,
                           gamma_hat: float, N: int,
                           x=(0, 0)) -> VTiltedResult:
    """The walk-averaged tilted mean of V^N anchored at x: both walks are
    integrated out, the V-side start runs over the whole center box. The
    coincidence count of two independent walks is a renewal of the doubled
    time difference walk, so the box sum collapses to a renewal whose first
    factor is the box-summed meeting kernel. This is the quantity whose
    growth in N signals the tilted mean diverging; the raw field holds the
    box-summed expectation before centering and normalization."""
    if N < 2:
        raise DegenerateInputError("need N >= 2")
    spec = BoxSpec(N)
    if point_box_distance(spec, tuple(x), (0, 0)) > 0:
        raise DegenerateInputError("anchor must lie in the center box")
    w = _coincidence_weight(model, beta_hat, gamma_hat, N)
    (xlo, xhi), (ylo, yhi) = spec.box_range((0, 0))
    lf = _log_factorials(2 * N + 4)
    dxs = np.arange(xlo, xhi + 1) - x[0]
    dys = np.arange(ylo, yhi + 1) - x[1]
    first = np.zeros(N + 1)
    r = np.zeros(N + 1)
    for n in range(1, N + 1):
        gu = _b1_grid(2 * n, dxs + dys[:, None], lf)
        gv = _b1_grid(2 * n, dxs - dys[:, None], lf)
        first[n] = float((gu * gv).sum())
        r[n] = _b1(2 * n, 0, lf) ** 2
    z = backends.renewal_sum(w - 1.0, first, r)
    total = math.fsum(z[1:])
    return VTiltedResult(value=math.sqrt(math.log(N)) / N * total,
                         raw=total, w=w)
