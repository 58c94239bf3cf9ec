"""Second moments by renewal resummation and fractional-moment sampling.

Q[W_N^2] equals E_{S,S'}[(1 + Lambda_1)^{#coincidences}] for two
independent walks, which resums into the renewal recursion

    z_0 = 1,   z_n = Lambda_1 * sum_{m<n} z_m * r_{n-m},

with r_i the return probability of the difference walk at time i (the
difference of two independent simple walks at time i has the law of a
simple walk at time 2i). Q[W_N^2] is then sum_{n<=N} z_n. Accumulation
uses extended precision because near the critical coupling the verdict
hangs on digits naive summation loses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import backends, env, rng, walk
from .errors import (
    DegenerateInputError,
    JensenViolationError,
    ResourceCapError,
)
from .records import EstimateRecord

SECOND_MOMENT_CAP = 2 ** 16


def lambda1(model: env.EnvironmentModel, beta: float) -> float:
    """Lambda_1 = exp(lambda(2 beta) - 2 lambda(beta)) - 1."""
    return math.expm1(env.cumulant(model, 2.0 * beta)
                      - 2.0 * env.cumulant(model, beta))


def second_moment_exact(model: env.EnvironmentModel, beta: float, N: int,
                        d: int, cap: int = SECOND_MOMENT_CAP) -> float:
    """Exact Q[W_N^2] via the renewal recursion; O(N^2) time."""
    if N < 1:
        raise DegenerateInputError("horizon must be >= 1")
    if N > cap:
        raise ResourceCapError(f"exact second moment capped at N = {cap}")
    lam1 = lambda1(model, beta)
    if lam1 == 0.0:
        return 1.0
    r = walk.return_probabilities(d, N)
    z = backends.renewal_sum(lam1, r, r)
    return float(math.fsum(z))  # z[0] = 1 supplies the n = 0 term


def second_moment_bruteforce(model: env.EnvironmentModel, beta: float,
                             N: int, d: int) -> float:
    """Oracle: enumerate all (2d)^(2N) path pairs and average the overlap
    weight (1 + Lambda_1)^{#{0 < i <= N : S_i = S'_i}}."""
    if N > 6:
        raise DegenerateInputError("bruteforce enumeration capped at N = 6")
    steps = []
    for ax in range(d):
        for s in (1, -1):
            e = [0] * d
            e[ax] = s
            steps.append(e)
    paths = []
    for seq in itertools.product(range(2 * d), repeat=N):
        pos = np.zeros((N, d), dtype=np.int64)
        cur = [0] * d
        for i, k in enumerate(seq):
            for ax in range(d):
                cur[ax] += steps[k][ax]
            pos[i] = cur
        paths.append(pos)
    arr = np.stack(paths)  # (P, N, d)
    base = 1.0 + lambda1(model, beta)
    p = len(arr)
    total = 0.0
    chunk = max(1, 2 ** 22 // (p * N))
    for lo in range(0, p, chunk):
        block = arr[lo:lo + chunk]  # (c, N, d)
        eq = np.all(block[:, None, :, :] == arr[None, :, :, :], axis=3)
        overlaps = eq.sum(axis=2)  # (c, P)
        total += float((base ** overlaps).sum())
    return total / (p * p)


@dataclass(frozen=True)
class MomentScanRecord:
    N: int
    beta_hat: float
    beta_N: float
    lambda1: float
    second_moment: float
    d: int
    verdict: str

    def as_row(self):
        return {
            "d": self.d,
            "N": self.N,
            "beta_hat": self.beta_hat,
            "beta_N": self.beta_N,
            "lambda1": self.lambda1,
            "second_moment": self.second_moment,
            "verdict": self.verdict,
        }


def critical_coupling(model: env.EnvironmentModel) -> float:
    """The boundedness threshold sqrt(pi / lambda''(0))."""
    return math.sqrt(math.pi / env.lambda_pp0(model))


_NEAR_THRESHOLD = 0.01


def intermediate_scan(model: env.EnvironmentModel, beta_hat: float,
                      N_grid, d: int = 2, cap: int = SECOND_MOMENT_CAP):
    """Q[W_N^2(beta_N)] with beta_N = beta_hat / sqrt(log N) over a grid.

    The verdict column records the side of the critical coupling beta_hat
    falls on; values within a small margin are reported as near-threshold
    with no claim either way.
    """
    if beta_hat <= 0:
        raise DegenerateInputError("beta_hat must be positive")
    thr = critical_coupling(model)
    if abs(beta_hat - thr) <= _NEAR_THRESHOLD:
        verdict = "near-threshold"
    elif beta_hat < thr:
        verdict = "bounded"
    else:
        verdict = "diverging"
    out = []
    for N in sorted(N_grid):
        if N < 3:
            raise DegenerateInputError("scan requires N >= 3 (log N > 1)")
        beta_N = beta_hat / math.sqrt(math.log(N))
        out.append(MomentScanRecord(
            N=N, beta_hat=beta_hat, beta_N=beta_N,
            lambda1=lambda1(model, beta_N),
            second_moment=second_moment_exact(model, beta_N, N, d, cap=cap),
            d=d, verdict=verdict,
        ))
    return out


def dnq(N: int, q: int) -> float:
    """D_N^q = (1/N) sum over 1<=j_1<...<j_q<=N of prod 1/(j_{i+1}-j_i).

    Computed from the gap representation: with a(delta) = 1/delta, the
    inner sum over gap vectors of total s has (N - s) placements, so
    D = (1/N) * sum_s (N - s) * a^{*(q-1)}(s).
    """
    if not 1 <= q <= 5:
        raise DegenerateInputError("order q must be in 1..5")
    if N < q:
        raise DegenerateInputError("need N >= q")
    if q == 1:
        return 1.0
    a = np.zeros(N, dtype=np.float64)
    a[1:] = 1.0 / np.arange(1, N, dtype=np.float64)
    conv = np.array([1.0])
    for _ in range(q - 1):
        conv = np.convolve(conv, a)
    s = np.arange(len(conv), dtype=np.float64)
    keep = s < N
    return float(np.dot((N - s[keep]), conv[keep]) / N)


def sample_log_partitions(model: env.EnvironmentModel, beta: float, n: int,
                          d: int, M: int, seed: int,
                          cap_bytes=None) -> np.ndarray:
    """log W_n over M independent environments, seeded per task."""
    from . import partition  # deferred to keep module load cheap

    if M < 2:
        raise DegenerateInputError("need at least two samples")
    box = tuple((-n, n) for _ in range(d))
    out = np.empty(M)
    for k in range(M):
        field = env.EnvironmentField(
            model=model, seed=rng.task_seed(seed, k),
            time_range=(1, n), spatial_box=box,
        )
        logw, _ = partition.log_partition(field, model, beta, n,
                                          cap_bytes=cap_bytes)
        out[k] = logw
    return out


def jensen_certificate(logws: np.ndarray, theta: float, n: int) -> float:
    """(1/(n theta)) log mean(W^theta), asserting the Jensen ordering.

    mean(log W)/n must not exceed the certificate by more than float
    noise; a violation means the sampling or the transfer is broken, so
    it raises rather than returning.
    """
    if not 0.0 < theta < 1.0:
        raise DegenerateInputError("theta must be in (0,1)")
    mean_log = math.fsum(logws) / len(logws) / n
    shift = float(np.max(logws)) * theta
    mean_pow = math.fsum(np.exp(theta * logws - shift)) / len(logws)
    cert = (shift + math.log(mean_pow)) / (n * theta)
    if mean_log - cert > 1e-12:
        raise JensenViolationError(
            f"mean(log W)/n = {mean_log} exceeds certificate {cert}"
        )
    return cert


def fractional_moment_mc(model: env.EnvironmentModel, beta: float,
                         theta: float, n: int, M: int, seed: int,
                         d: int = 2) -> EstimateRecord:
    """Monte Carlo Q[W_n^theta] with the derived decay certificate."""
    logws = sample_log_partitions(model, beta, n, d, M, seed)
    vals = np.exp(theta * logws)
    mean = math.fsum(vals) / M
    se = float(vals.std(ddof=1)) / math.sqrt(M)
    cert = jensen_certificate(logws, theta, n)
    return EstimateRecord(
        name="fractional_moment",
        value=mean,
        std_error=se,
        n_samples=M,
        extra={
            "beta": beta, "theta": theta, "n": n, "d": d, "seed": seed,
            "certificate": cert,
            "mean_log_w_over_n": math.fsum(logws) / M / n,
        },
    )
