"""Counter-based random streams.

Every random quantity in this package is a pure function of
(seed, tag, time, site): the 64-bit key

    key = seed + C_TAG*tag + C_TIME*t + C_X*kx [+ C_Y*ky] [+ C_Z*kz]

is passed through the splitmix64 finalizer, whose top bits become a
uniform in (0, 1); gaussians apply the inverse normal CDF to that
uniform. Nothing is ever stored or advanced, so fields regenerate
identically regardless of evaluation order, worker count, or platform.

Signed coordinates are zigzag-encoded before keying. Tags separate
logical streams (base environment, tilted overrides, walk sampling,
task-seed derivation) so that they can never collide.

dtype note: NumPy 2 returns scalars from 0-d array arithmetic and warns
on uint64 scalar overflow even though the wraparound is exactly what we
want; the hashing helpers therefore run inside errstate(over="ignore").
"""

from __future__ import annotations

import numpy as np

# key-mixing constants: golden-ratio increment and the two splitmix64
# multipliers, reused as independent per-axis strides, plus two more
# odd constants for the third axis and the tag lane
C_TIME = np.uint64(0x9E3779B97F4A7C15)
C_X = np.uint64(0xBF58476D1CE4E5B9)
C_Y = np.uint64(0x94D049BB133111EB)
C_Z = np.uint64(0xD6E8FEB86659FD93)
C_TAG = np.uint64(0xA5A3B31C1FEB4D27)

TAG_BASE = 0
TAG_TILT = 1
TAG_WALK = 2
TAG_TASK = 3

_TWO53 = 2.0**-53

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _u64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.uint64)


def fmix64(z) -> np.ndarray:
    """splitmix64 finalizer (Steele et al.); full avalanche on 64 bits."""
    z = _u64(z)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def zigzag(x) -> np.ndarray:
    """Map signed integers to unsigned: 0,-1,1,-2,2,... -> 0,1,2,3,4,..."""
    x = np.asarray(x, dtype=np.int64)
    with np.errstate(over="ignore"):
        return (x.astype(np.uint64) << np.uint64(1)) ^ (
            x >> np.int64(63)
        ).astype(np.uint64)


def site_key(seed, tag, t, kx, ky=None, kz=None) -> np.ndarray:
    """Fold (seed, tag, time, encoded coordinates) into one hashed word.

    kx/ky/kz are already zigzag-encoded unsigned words; ky and kz are
    omitted for lower-dimensional lattices.
    """
    with np.errstate(over="ignore"):
        k = _u64(seed) + C_TAG * _u64(tag) + C_TIME * _u64(t) + C_X * _u64(kx)
        if ky is not None:
            k = k + C_Y * _u64(ky)
        if kz is not None:
            k = k + C_Z * _u64(kz)
    return fmix64(k)


def uniform53(h) -> np.ndarray:
    """One uniform in (0,1) from the top 53 bits; never exactly 0 or 1."""
    return ((_u64(h) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53


# Wichura's PPND16 rational approximations to the inverse normal CDF
# (Applied Statistics 37, algorithm AS 241); relative error below 1e-15
# over the full double range. Coefficients are split by |p - 1/2|.
_A = (
    2509.0809287301226727, 33430.575583588128105, 67265.770927008700853,
    45921.953931549871457, 13731.693765509461125, 1971.5909503065514427,
    133.14166789178437745, 3.387132872796366608,
)
_B = (
    5226.495278852545703, 28729.085735721942674, 39307.89580009271061,
    21213.794301586595867, 5394.1960214247511077, 687.1870074920579083,
    42.313330701600911252, 1.0,
)
_C = (
    7.7454501427834140764e-4, 0.0227238449892691845833,
    0.24178072517745061177, 1.27045825245236838258,
    3.64784832476320460504, 5.7694972214606914055,
    4.6303378461565452959, 1.42343711074968357734,
)
_D = (
    1.05075007164441684324e-9, 5.475938084995344946e-4,
    0.0151986665636164571966, 0.14810397642748007459,
    0.68976733498510000455, 1.6763848301838038494,
    2.05319162663775882187, 1.0,
)
_E = (
    2.01033439929228813265e-7, 2.71155556874348757815e-5,
    0.0012426609473880784386, 0.026532189526576123093,
    0.29656057182850489123, 1.7848265399172913358,
    5.4637849111641143699, 6.6579046435011037772,
)
_F = (
    2.04426310338993978564e-15, 1.4215117583164458887e-7,
    1.8463183175100546818e-5, 7.868691311456132591e-4,
    0.0148753612908506148525, 0.13692988092273580531,
    0.59983220655588793769, 1.0,
)


def _horner(c, r):
    acc = np.full_like(r, c[0])
    for ck in c[1:]:
        acc = acc * r + ck
    return acc


def norm_ppf(p):
    """Inverse standard normal CDF (AS 241, double precision).

    Vectorized; the compiled backend evaluates the identical polynomials
    in the identical order, so both produce the same doubles up to
    contraction-free rounding.
    """
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q * q
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(central, q * _horner(_A, r) / _horner(_B, r), 0.0)

        pm = np.where(q < 0.0, p, 1.0 - p)
        pm = np.where(central, 0.25, pm)  # dummy, masked out below
        rt = np.sqrt(-np.log(pm))
        near = rt <= 5.0
        r1 = rt - 1.6
        r2 = rt - 5.0
        tail = np.where(
            near,
            _horner(_C, r1) / _horner(_D, r1),
            _horner(_E, r2) / _horner(_F, r2),
        )
    tail = np.where(q < 0.0, -tail, tail)
    out = np.where(central, out, tail)
    return out if out.shape else float(out)


def gaussian_at(seed, tag, t, x, y=None, z=None, shift=0.0):
    """Standard normal stream value at integer site(s), plus optional shift."""
    g = norm_ppf(uniform_at(seed, tag, t, x, y, z))
    if shift:
        g = g + shift
    return g


def uniform_at(seed, tag, t, x, y=None, z=None) -> np.ndarray:
    """Uniform(0,1) stream value at integer site(s)."""
    ky = None if y is None else zigzag(y)
    kz = None if z is None else zigzag(z)
    return uniform53(site_key(seed, tag, t, zigzag(x), ky, kz))


def task_seed(master_seed: int, index: int) -> int:
    """Derive the seed of Monte Carlo task `index` from the master seed.

    The derivation is a counter hash, so any subset of tasks can be
    regenerated independently; results then never depend on how tasks are
    distributed over workers.
    """
    return int(site_key(master_seed, TAG_TASK, index, 0))
