"""Environment laws: cumulants, tilting, lazy field reproducibility."""

import math

import numpy as np
import pytest

from dpre import env, rng
from dpre.errors import DegenerateInputError, WindowViolationError

FD_VALUES = (-1.0, 0.0, 2.0)
FD_PROBS = (0.3, 0.5, 0.2)


def models():
    return [
        env.gaussian_unit(),
        env.rademacher(),
        env.finite_discrete(FD_VALUES, FD_PROBS),
    ]


# -- cumulants --------------------------------------------------------------

# lambda(beta) frozen from the defining formulas evaluated independently
RAD_LAMBDA = [
    (0.3, 0.044340769925940306),
    (0.7, 0.22727022935850563),
    (1.0, 0.43378083048302712),
    (2.0, 1.3250027473578645),
]
FD_LAMBDA = [
    (0.3, 0.083117262182533555),
    (0.7, 0.37844710998269809),
    (1.3, 1.186167367658792),
]


@pytest.mark.parametrize("beta,want", RAD_LAMBDA)
def test_cumulant_rademacher(beta, want):
    got = env.cumulant(env.rademacher(), beta)
    assert got == pytest.approx(want, rel=1e-14)
    # even function
    assert env.cumulant(env.rademacher(), -beta) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("beta,want", FD_LAMBDA)
def test_cumulant_finite_discrete(beta, want):
    got = env.cumulant(env.finite_discrete(FD_VALUES, FD_PROBS), beta)
    assert got == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("beta", [0.25, 0.5, 1.0, 2.0, 5.0])
def test_cumulant_gaussian_exact(beta, model=None):
    assert env.cumulant(env.gaussian_unit(), beta) == 0.5 * beta * beta


def test_cumulant_gaussian_quadrature_crosscheck():
    # Gauss-Hermite quadrature of Q[e^{beta eta}] against beta^2/2
    nodes, weights = np.polynomial.hermite_e.hermegauss(61)
    for beta in (0.5, 1.0, 2.0):
        val = float(np.dot(weights, np.exp(beta * nodes))) / math.sqrt(2 * math.pi)
        assert env.cumulant(env.gaussian_unit(), beta) == pytest.approx(
            math.log(val), abs=1e-12
        )


@pytest.mark.parametrize("model", models(), ids=lambda m: m.family)
def test_cumulant_zero_is_exact_zero(model):
    assert env.cumulant(model, 0.0) == 0.0


@pytest.mark.parametrize("model", models(), ids=lambda m: m.family)
def test_cumulant_convex(model):
    grid = np.linspace(-2.0, 2.0, 21)
    lam = [env.cumulant(model, b) for b in grid]
    for i in range(1, len(grid) - 1):
        assert lam[i] <= 0.5 * (lam[i - 1] + lam[i + 1]) + 1e-12


@pytest.mark.parametrize("model", models(), ids=lambda m: m.family)
def test_lambda_pp0_matches_finite_difference(model):
    h = 1e-3
    num = (
        env.cumulant(model, h) - 2.0 * env.cumulant(model, 0.0)
        + env.cumulant(model, -h)
    ) / (h * h)
    assert env.lambda_pp0(model) == pytest.approx(num, abs=1e-6)


def test_cumulant_discrete_large_beta_does_not_overflow():
    m = env.finite_discrete(FD_VALUES, FD_PROBS)
    lam = env.cumulant(m, 400.0)
    # dominated by the largest atom: log(p_max) + beta*v_max
    assert lam == pytest.approx(math.log(0.2) + 400.0 * 2.0, rel=1e-13)


@pytest.mark.parametrize("model", models(), ids=lambda m: m.family)
def test_e_weight_mean_one(model):
    beta = 0.8
    if model.family == env.GAUSSIAN_UNIT:
        nodes, weights = np.polynomial.hermite_e.hermegauss(61)
        mean = float(
            np.dot(weights, [env.e_weight(model, beta, v) for v in nodes])
        ) / math.sqrt(2 * math.pi)
    elif model.family == env.RADEMACHER:
        mean = 0.5 * (
            env.e_weight(model, beta, 1.0) + env.e_weight(model, beta, -1.0)
        )
    else:
        mean = sum(
            p * env.e_weight(model, beta, v)
            for p, v in zip(model.probabilities, model.values)
        )
    assert mean == pytest.approx(1.0, rel=1e-12)


# -- tilted laws ------------------------------------------------------------


def test_tilted_gaussian_is_mean_shift():
    law = env.tilted_law(env.gaussian_unit(), 1.3)
    assert law.mean == 1.3
    assert law.variance == 1.0


def test_tilted_rademacher_closed_form():
    law = env.tilted_law(env.rademacher(), 0.5)
    assert law.p_plus == pytest.approx(0.73105857863000501, rel=1e-15)
    assert law.mean == pytest.approx(math.tanh(0.5), rel=1e-13)


def test_tilted_discrete_reweights_masses():
    law = env.tilted_law(env.finite_discrete(FD_VALUES, FD_PROBS), 0.7)
    want = (0.10203698694613085, 0.3424620978748345, 0.5555009151790347)
    assert law.probabilities == pytest.approx(want, rel=1e-13)
    assert law.mean == pytest.approx(1.0089648434119385, rel=1e-13)
    assert sum(law.probabilities) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("model", models()[1:], ids=lambda m: m.family)
@pytest.mark.parametrize("beta", [0.4, 1.1])
def test_tilted_mean_is_lambda_prime(model, beta):
    # E_tilted[eta] = lambda'(beta), checked by central difference
    h = 1e-5
    lp = (env.cumulant(model, beta + h) - env.cumulant(model, beta - h)) / (2 * h)
    assert env.tilted_law(model, beta).mean == pytest.approx(lp, abs=1e-9)


def test_tilted_expectation_helper():
    law = env.tilted_law(env.rademacher(), 0.5)
    assert law.expectation(lambda v: v * v) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DegenerateInputError):
        env.tilted_law(env.gaussian_unit(), 0.5).expectation(lambda v: v)


# -- model validation and serialization --------------------------------------


def test_model_rejects_bad_input():
    with pytest.raises(DegenerateInputError):
        env.EnvironmentModel("cauchy")
    with pytest.raises(DegenerateInputError):
        env.finite_discrete((1.0, 2.0), (0.7, 0.7))
    with pytest.raises(DegenerateInputError):
        env.finite_discrete((1.0,), (1.0,))  # zero variance
    with pytest.raises(DegenerateInputError):
        env.EnvironmentModel(env.GAUSSIAN_UNIT, values=(1.0,))


def test_model_json_round_trip():
    for m in models():
        back = env.EnvironmentModel.from_json_dict(m.to_json_dict())
        assert back == m


# -- fields ------------------------------------------------------------------


def field_2d(model, seed=11, tilt=None, n=32, half=40):
    box = ((-half, half), (-half, half))
    return env.EnvironmentField(model, seed, (1, n), box, tilt=tilt)


@pytest.mark.parametrize("model", models(), ids=lambda m: m.family)
def test_field_reproducible(model):
    f1 = field_2d(model)
    f2 = field_2d(model)
    pts = [(1, (0, 0)), (5, (3, -2)), (32, (-7, 7))]
    for i, x in pts:
        assert f1.eta_at(i, x) == f2.eta_at(i, x)
    f3 = field_2d(model, seed=12)
    assert any(f1.eta_at(i, x) != f3.eta_at(i, x) for i, x in pts)


def test_field_window_enforced():
    f = field_2d(env.gaussian_unit())
    with pytest.raises(WindowViolationError):
        f.eta_at(0, (0, 0))
    with pytest.raises(WindowViolationError):
        f.eta_at(33, (0, 0))
    with pytest.raises(WindowViolationError):
        f.eta_at(1, (41, 0))
    with pytest.raises(WindowViolationError):
        f.eta_at(1, (0,))


def test_field_values_live_on_atoms():
    f = field_2d(env.rademacher())
    vals = {f.eta_at(i, (x, 0)) for i in range(1, 11) for x in range(-5, 6)}
    assert vals <= {-1.0, 1.0}
    g = field_2d(env.finite_discrete(FD_VALUES, FD_PROBS))
    vals = {g.eta_at(i, (x, 0)) for i in range(1, 11) for x in range(-5, 6)}
    assert vals <= set(FD_VALUES)


def test_field_gaussian_moments():
    f = field_2d(env.gaussian_unit(), seed=77, n=20, half=25)
    draws = np.array(
        [f.eta_at(i, (x, y)) for i in range(1, 21)
         for x in range(-10, 11) for y in range(-10, 11)]
    )
    n = draws.size
    assert abs(draws.mean()) < 4.0 / math.sqrt(n)
    assert abs(draws.var() - 1.0) < 4.0 * math.sqrt(2.0 / n)


def test_field_discrete_frequencies():
    f = field_2d(env.finite_discrete(FD_VALUES, FD_PROBS), seed=3, n=25, half=25)
    draws = [f.eta_at(i, (x, y)) for i in range(1, 26)
             for x in range(-12, 13) for y in range(-12, 13)]
    n = len(draws)
    for v, p in zip(FD_VALUES, FD_PROBS):
        freq = sum(1 for d in draws if d == v) / n
        assert abs(freq - p) < 4.0 * math.sqrt(p * (1 - p) / n)


class _StraightPath:
    """Minimal path stub: S_i = (i, 0)."""

    def position(self, i):
        return (i, 0)


def test_tilted_field_changes_only_the_path():
    model = env.gaussian_unit()
    base = field_2d(model, seed=5)
    tilted = field_2d(model, seed=5, tilt=(_StraightPath(), 0.9))
    # off-path sites agree bit for bit
    for i in range(1, 11):
        for x in [(i + 1, 0), (i, 1), (-i, 3)]:
            assert tilted.eta_at(i, x) == base.eta_at(i, x)
    # on-path sites are redrawn from the tilted stream
    on = [tilted.eta_at(i, (i, 0)) for i in range(1, 33)]
    off = [base.eta_at(i, (i, 0)) for i in range(1, 33)]
    assert on != off


def test_tilted_field_mean_shift():
    model = env.gaussian_unit()
    beta = 1.1
    # aggregate on-path draws across many seeds: mean should be near beta
    draws = []
    for s in range(400):
        f = field_2d(model, seed=1000 + s, tilt=(_StraightPath(), beta), n=8)
        draws.extend(f.eta_at(i, (i, 0)) for i in range(1, 9))
    draws = np.array(draws)
    assert abs(draws.mean() - beta) < 4.0 / math.sqrt(draws.size)


def test_tilted_rademacher_field_bias():
    model = env.rademacher()
    beta = 0.8
    pp = 1.0 / (1.0 + math.exp(-2.0 * beta))
    draws = []
    for s in range(400):
        f = field_2d(model, seed=2000 + s, tilt=(_StraightPath(), beta), n=8)
        draws.extend(f.eta_at(i, (i, 0)) for i in range(1, 9))
    draws = np.array(draws)
    freq = float(np.mean(draws == 1.0))
    assert abs(freq - pp) < 4.0 * math.sqrt(pp * (1 - pp) / draws.size)


def test_field_covers():
    f = field_2d(env.gaussian_unit())
    assert f.covers(1, 32, ((-40, 40), (-40, 40)))
    assert not f.covers(0, 32, ((-40, 40), (-40, 40)))
    assert not f.covers(1, 32, ((-41, 40), (-40, 40)))


def test_field_1d_and_3d():
    m = env.gaussian_unit()
    f1 = env.EnvironmentField(m, 9, (1, 10), ((-10, 10),))
    f3 = env.EnvironmentField(m, 9, (1, 10), ((-10, 10),) * 3)
    assert f1.d == 1 and f3.d == 3
    assert f1.eta_at(4, (2,)) == f1.eta_at(4, (2,))
    assert f3.eta_at(4, (2, -1, 3)) == f3.eta_at(4, (2, -1, 3))
    assert f3.eta_at(4, (2, -1, 3)) != f3.eta_at(4, (2, -1, 4))
