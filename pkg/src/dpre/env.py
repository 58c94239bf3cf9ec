"""Disorder environments: laws, cumulants, fields, exponential tilting.

The disorder is an i.i.d. space-time field eta(i, x), i >= 1, x in Z^d, with
cumulant generating function lambda(beta) = log Q[exp(beta*eta)] assumed
finite for all beta. Three families are admitted, each with closed-form
lambda:

    gaussian-unit    eta ~ N(0, 1),            lambda(beta) = beta^2 / 2
    rademacher       eta ~ +-1 fair coin,      lambda(beta) = log cosh beta
    finite-discrete  eta ~ sum p_k delta_{v_k}, lambda(beta) = log sum p_k e^{beta v_k}

Fields are never materialized: eta(i, x) is regenerated on demand from a
counter-based stream (see rng). A field may carry a tilt (path S, beta), in
which case the sites (i, S_i) on the path are drawn from the tilted law
exp(beta*eta - lambda(beta)) dQ using a distinct stream tag, while all other
sites share the base realization. That is exactly the change of measure Q_S:
only on-path marginals are reweighted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import rng
from .errors import DegenerateInputError, WindowViolationError

GAUSSIAN_UNIT = "gaussian-unit"
RADEMACHER = "rademacher"
FINITE_DISCRETE = "finite-discrete"

# numeric family codes shared with the compiled backend
FAMILY_CODE = {GAUSSIAN_UNIT: 0, RADEMACHER: 1, FINITE_DISCRETE: 2}


@dataclass(frozen=True)
class EnvironmentModel:
    """A disorder law with closed-form cumulant.

    For finite-discrete, `values`/`probabilities` give the atoms; the
    probabilities must be nonnegative and sum to 1 within 1e-12 (they are
    renormalized exactly once at construction).
    """

    family: str
    values: tuple = ()
    probabilities: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILY_CODE:
            raise DegenerateInputError(f"unknown family {self.family!r}")
        if self.family == FINITE_DISCRETE:
            v = np.asarray(self.values, dtype=float)
            p = np.asarray(self.probabilities, dtype=float)
            if v.size == 0 or v.shape != p.shape:
                raise DegenerateInputError(
                    "finite-discrete needs matching values/probabilities"
                )
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise DegenerateInputError(
                    "probabilities must be nonnegative and sum to 1"
                )
            p = p / p.sum()
            object.__setattr__(self, "values", tuple(float(x) for x in v))
            object.__setattr__(self, "probabilities", tuple(float(x) for x in p))
            if self.variance() <= 0.0:
                raise DegenerateInputError("degenerate law: zero variance")
        elif self.values or self.probabilities:
            raise DegenerateInputError(
                f"{self.family} takes no values/probabilities"
            )

    # -- moments ----------------------------------------------------------

    def mean(self) -> float:
        if self.family == GAUSSIAN_UNIT:
            return 0.0
        if self.family == RADEMACHER:
            return 0.0
        v = np.asarray(self.values)
        p = np.asarray(self.probabilities)
        return float(np.dot(p, v))

    def variance(self) -> float:
        if self.family in (GAUSSIAN_UNIT, RADEMACHER):
            return 1.0
        v = np.asarray(self.values)
        p = np.asarray(self.probabilities)
        m = np.dot(p, v)
        return float(np.dot(p, (v - m) ** 2))

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == FINITE_DISCRETE:
            d["values"] = list(self.values)
            d["probabilities"] = list(self.probabilities)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "EnvironmentModel":
        return cls(
            family=d["family"],
            values=tuple(d.get("values", ())),
            probabilities=tuple(d.get("probabilities", ())),
        )


def gaussian_unit() -> EnvironmentModel:
    return EnvironmentModel(GAUSSIAN_UNIT)


def rademacher() -> EnvironmentModel:
    return EnvironmentModel(RADEMACHER)


def finite_discrete(values, probabilities) -> EnvironmentModel:
    return EnvironmentModel(FINITE_DISCRETE, tuple(values), tuple(probabilities))


def cumulant(model: EnvironmentModel, beta: float) -> float:
    """lambda(beta) = log Q[exp(beta*eta)], closed form per family.

    The discrete sum is max-shifted so arbitrarily large |beta| stays finite.
    """
    if beta == 0.0:
        return 0.0  # identity, exact by definition
    if model.family == GAUSSIAN_UNIT:
        return 0.5 * beta * beta
    if model.family == RADEMACHER:
        # log cosh with overflow-safe form for large |beta|
        a = abs(beta)
        return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)
    v = np.asarray(model.values)
    p = np.asarray(model.probabilities)
    t = beta * v
    m = t.max()
    return float(m + np.log(np.dot(p, np.exp(t - m))))


def lambda_pp0(model: EnvironmentModel) -> float:
    """lambda''(0): the variance of eta, the only model input to thresholds."""
    return model.variance()


def e_weight(model: EnvironmentModel, beta: float, eta: float) -> float:
    """e_{i,x}(beta) = exp(beta*eta - lambda(beta)); mean one over eta."""
    return math.exp(beta * eta - cumulant(model, beta))


def log_e_weight(model: EnvironmentModel, beta: float, eta) -> float:
    """log e_{i,x}(beta), safe for extreme arguments."""
    return beta * eta - cumulant(model, beta)


@dataclass(frozen=True)
class TiltedLaw:
    """Single-site marginal of Q_S: density e^{beta*eta - lambda} against Q.

    gaussian-unit tilts to N(beta, 1); rademacher tilts to
    P(+1) = e^beta / (2 cosh beta); finite-discrete reweights its masses.
    """

    model: EnvironmentModel
    beta: float
    mean: float = dc_field(init=False)
    variance: float = dc_field(init=False)
    p_plus: float = dc_field(init=False, default=float("nan"))
    probabilities: tuple = dc_field(init=False, default=())

    def __post_init__(self):
        m = self.model
        b = self.beta
        if m.family == GAUSSIAN_UNIT:
            object.__setattr__(self, "mean", b)
            object.__setattr__(self, "variance", 1.0)
        elif m.family == RADEMACHER:
            pp = 1.0 / (1.0 + math.exp(-2.0 * b))  # e^b / (2 cosh b)
            object.__setattr__(self, "p_plus", pp)
            object.__setattr__(self, "mean", 2.0 * pp - 1.0)
            object.__setattr__(self, "variance", 4.0 * pp * (1.0 - pp))
        else:
            lam = cumulant(m, b)
            p = np.asarray(m.probabilities)
            v = np.asarray(m.values)
            q = p * np.exp(b * v - lam)
            q = q / q.sum()  # exact mass-1 despite rounding
            mu = float(np.dot(q, v))
            object.__setattr__(self, "probabilities", tuple(float(x) for x in q))
            object.__setattr__(self, "mean", mu)
            object.__setattr__(self, "variance", float(np.dot(q, (v - mu) ** 2)))

    def expectation(self, f) -> float:
        """E_tilted[f(eta)] for the discrete families, in closed form."""
        if self.model.family == RADEMACHER:
            return self.p_plus * f(1.0) + (1.0 - self.p_plus) * f(-1.0)
        if self.model.family == FINITE_DISCRETE:
            return float(
                sum(q * f(v) for q, v in zip(self.probabilities, self.model.values))
            )
        raise DegenerateInputError("closed-form expectation is discrete-only")


def tilted_law(model: EnvironmentModel, beta: float) -> TiltedLaw:
    """The tilted single-site law used for on-path sites of Q_S fields."""
    return TiltedLaw(model, beta)


def _draw(model, law, seed, tag, i, x):
    """One stream draw at site x (tuple), base law or tilted law."""
    fam = model.family
    if fam == GAUSSIAN_UNIT:
        shift = law.beta if law is not None else 0.0
        return float(rng.gaussian_at(seed, tag, i, *x, shift=shift))
    u = float(rng.uniform_at(seed, tag, i, *x))
    if fam == RADEMACHER:
        pp = law.p_plus if law is not None else 0.5
        return 1.0 if u < pp else -1.0
    probs = law.probabilities if law is not None else model.probabilities
    acc = 0.0
    for v, p in zip(model.values, probs):
        acc += p
        if u < acc:
            return v
    return model.values[-1]


@dataclass(frozen=True)
class EnvironmentField:
    """A reproducible realization of the disorder on a declared window.

    time_range is the closed interval [1, n_max] (or [lo, hi] for shifted
    windows); spatial_box is a tuple of per-coordinate (lo, hi) pairs whose
    length fixes the dimension. Nothing is stored: every access regenerates
    the value from the counter stream.

    tilt, when present, is a pair (path, beta): path must expose
    position(i) -> coordinate tuple for every i in its time range, and the
    sites (i, path.position(i)) are then drawn from tilted_law(model, beta)
    on the TILT stream. Off-path values are identical to the untilted field
    with the same seed.
    """

    model: EnvironmentModel
    seed: int
    time_range: tuple
    spatial_box: tuple
    tilt: tuple = None

    @property
    def d(self) -> int:
        return len(self.spatial_box)

    def covers(self, i_lo: int, i_hi: int, box) -> bool:
        if i_lo < self.time_range[0] or i_hi > self.time_range[1]:
            return False
        return all(
            lo >= slo and hi <= shi
            for (lo, hi), (slo, shi) in zip(box, self.spatial_box)
        )

    def _check(self, i: int, x) -> None:
        if not (self.time_range[0] <= i <= self.time_range[1]):
            raise WindowViolationError(
                f"time {i} outside window {self.time_range}"
            )
        if len(x) != self.d:
            raise WindowViolationError(f"point {x} has wrong dimension")
        for xi, (lo, hi) in zip(x, self.spatial_box):
            if not (lo <= xi <= hi):
                raise WindowViolationError(
                    f"site {tuple(x)} outside window {self.spatial_box}"
                )

    def _tilt_law(self) -> TiltedLaw:
        return tilted_law(self.model, self.tilt[1])

    def eta_at(self, i: int, x) -> float:
        """eta(i, x), deterministic in (seed, i, x); window-checked."""
        x = tuple(x)
        self._check(i, x)
        if self.tilt is not None:
            path, _ = self.tilt
            if tuple(path.position(i)) == x:
                return _draw(self.model, self._tilt_law(), self.seed,
                             rng.TAG_TILT, i, x)
        return _draw(self.model, None, self.seed, rng.TAG_BASE, i, x)


def eta_at(field: EnvironmentField, i: int, x) -> float:
    return field.eta_at(i, x)
