import itertools
import math

import numpy as np
import pytest

from dpre import chaos, env, moments, walk
from dpre.errors import (
    DegenerateInputError,
    ResourceCapError,
    WindowViolationError,
)
from dpre.partition import BoxSpec

GAUSS = env.gaussian_unit()
RAD = env.rademacher()


def block_field(params, seed, model=GAUSS, tilt=None, pad=0):
    reach = params.N + pad
    dilated = tuple((lo - reach, hi + reach) for lo, hi in params.box())
    return env.EnvironmentField(
        model=model, seed=seed, time_range=(1, params.N),
        spatial_box=dilated, tilt=tilt,
    )


def neighbors(x):
    return [(x[0] + 1, x[1]), (x[0] - 1, x[1]),
            (x[0], x[1] + 1), (x[0], x[1] - 1)]


def box_sites(N):
    (xlo, xhi), (ylo, yhi) = BoxSpec(N).box_range((0, 0))
    return [(x, y) for x in range(xlo, xhi + 1) for y in range(ylo, yhi + 1)]


def test_params_validation():
    with pytest.raises(DegenerateInputError):
        chaos.ChaosParams(q=0, gamma_hat=1.0, N=16)
    with pytest.raises(DegenerateInputError):
        chaos.ChaosParams(q=2, gamma_hat=1.0, N=1)
    with pytest.raises(DegenerateInputError):
        chaos.ChaosParams(q=2, gamma_hat=-0.5, N=16)
    with pytest.raises(DegenerateInputError):
        chaos.ChaosParams(q=2, gamma_hat=1.0, N=16, theta=1.0)
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    assert p.gamma_N == pytest.approx(1.0 / math.sqrt(math.log(16)))
    assert p.d == 2


def test_coupled_beta_arithmetic():
    # q=2: beta = C1 * (log N)^(-1/4); at log N = 16 and C1 = 1 this is 0.5
    N = round(math.exp(16.0))
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=N, C1=1.0)
    assert p.coupled_beta() == pytest.approx(0.5, rel=1e-6)
    p1 = chaos.ChaosParams(q=1, gamma_hat=1.0, N=64, C1=3.0)
    assert p1.coupled_beta() == 3.0


def test_chaos_constants_gaussian_closed_forms():
    g, b = 0.3, 0.45
    c = chaos.chaos_constants(GAUSS, g, b)
    assert c.lambda3_cross == pytest.approx(math.expm1(g * b), rel=1e-14)
    assert c.m_on == c.lambda3_cross
    assert c.lambda2_pair == pytest.approx(
        math.expm1(g * g + 2 * g * b), rel=1e-14
    )
    assert c.ehat2_off == pytest.approx(moments.lambda1(GAUSS, g), rel=1e-14)
    expect_on = math.exp(2 * g * b) * math.expm1(g * g)
    assert c.ehat2_on == pytest.approx(expect_on, rel=1e-13)


def test_chaos_constants_vanish_and_expand():
    c0 = chaos.chaos_constants(RAD, 0.0, 0.5)
    assert c0.lambda3_cross == 0.0
    assert c0.ehat2_on == pytest.approx(0.0, abs=1e-15)
    assert c0.ehat2_off == 0.0
    tiny = chaos.chaos_constants(RAD, 1e-4, 1e-4)
    assert tiny.m_on / (1e-4 * 1e-4) == pytest.approx(
        env.lambda_pp0(RAD), rel=0.01
    )


def test_chaos_statistic_gamma_zero():
    p = chaos.ChaosParams(q=2, gamma_hat=0.0, N=8)
    field = block_field(p, seed=5)
    assert chaos.chaos_statistic(field, p) == 0.0


def test_chaos_statistic_q1_closed_form():
    p = chaos.ChaosParams(q=1, gamma_hat=0.8, N=2)
    field = block_field(p, seed=21)
    g = p.gamma_N
    lam = env.cumulant(GAUSS, g)
    table = walk.build_kernel(2, 2)
    total = 0.0
    for x in box_sites(2):
        for j in (1, 2):
            for dx in range(-j, j + 1):
                for dy in range(-j, j + 1):
                    y = (x[0] + dx, x[1] + dy)
                    pj = table.prob(j, (dx, dy))
                    if pj:
                        eps = math.expm1(g * field.eta_at(j, y) - lam)
                        total += pj * eps
    expect = math.sqrt(math.log(2)) / 2 * total
    got = chaos.chaos_statistic(field, p)
    assert got == pytest.approx(expect, abs=1e-12)


def test_chaos_statistic_q2_enumeration():
    p = chaos.ChaosParams(q=2, gamma_hat=1.1, N=2)
    field = block_field(p, seed=8, model=RAD)
    g = p.gamma_N
    lam = env.cumulant(RAD, g)

    def eps(j, y):
        return math.expm1(g * field.eta_at(j, y) - lam)

    total = 0.0
    for x in box_sites(2):
        for y1 in neighbors(x):
            for y2 in neighbors(y1):
                total += 0.0625 * eps(1, y1) * eps(2, y2)
    expect = math.sqrt(math.log(2)) / 2 * total
    orders = chaos.chaos_all_orders(field, p)
    assert orders[-1] == pytest.approx(expect, abs=1e-12)


def test_chaos_statistic_mean_zero():
    m = 500
    p3 = chaos.ChaosParams(q=3, gamma_hat=1.0, N=16)
    samples = np.empty((m, 3))
    for k in range(m):
        field = block_field(p3, seed=env.rng.task_seed(400, k))
        samples[k] = chaos.chaos_all_orders(field, p3)
    for col in range(3):
        se = samples[:, col].std(ddof=1) / math.sqrt(m)
        assert abs(samples[:, col].mean()) < 4 * se, col


def test_chaos_statistic_mean_zero_capped():
    # truncation drops whole path terms, all mean-zero, so the mean stays 0
    m = 300
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=64)
    vals = np.empty(m)
    for k in range(m):
        field = block_field(p, seed=env.rng.task_seed(401, k))
        vals[k] = chaos.chaos_statistic(field, p, cap=30)
    se = vals.std(ddof=1) / math.sqrt(m)
    assert abs(vals.mean()) < 4 * se


def test_chaos_cap_changes_value_but_full_cap_is_exact():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    field = block_field(p, seed=77)
    exact = chaos.chaos_statistic(field, p)
    assert chaos.chaos_statistic(field, p, cap=16) == exact
    assert chaos.chaos_statistic(field, p, cap=5) != exact


def test_chaos_window_violation():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    small = env.EnvironmentField(
        model=GAUSS, seed=3, time_range=(1, 16),
        spatial_box=((-10, 10), (-10, 10)),
    )
    with pytest.raises(WindowViolationError):
        chaos.chaos_statistic(small, p)
    short = env.EnvironmentField(
        model=GAUSS, seed=3, time_range=(1, 8),
        spatial_box=((-40, 40), (-40, 40)),
    )
    with pytest.raises(WindowViolationError):
        chaos.chaos_statistic(short, p)


def test_chaos_second_moment_mc():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    rec = chaos.chaos_second_moment_mc(GAUSS, p, 300, seed=12)
    assert rec.value > 0.0
    assert abs(rec.extra["mean_A"]) < 4 * rec.extra["se_A"]
    zero = chaos.chaos_second_moment_mc(GAUSS,
                                        chaos.ChaosParams(q=2, gamma_hat=0.0,
                                                          N=16),
                                        200, seed=12)
    assert zero.value == 0.0
    assert zero.std_error == 0.0
    with pytest.raises(DegenerateInputError):
        chaos.chaos_second_moment_mc(GAUSS, p, 50, seed=12)


def test_penalty_values():
    assert chaos.penalty(math.exp(4.0) * 1.01, 2.0) == -2.0
    assert chaos.penalty(math.exp(4.0), 2.0) == 0.0
    assert chaos.penalty(-5.0, 2.0) == 0.0


def test_g_product():
    vals = [math.exp(5.0), 1.0, math.exp(5.0)]
    assert chaos.g_product(vals, 2.0) == pytest.approx(math.exp(-4.0),
                                                       rel=1e-14)
    assert chaos.g_product([0.0, 0.0], 2.0) == 1.0


def test_penalty_cost_factor():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16, K=10.0)
    rec = chaos.penalty_cost_factor(GAUSS, p, 150, seed=6)
    assert rec.value == 1.0  # the indicator never fires at K = 10
    assert rec.extra["fire_fraction"] == 0.0
    assert rec.extra["bound_ok"] is True

    low = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16, K=1.0)
    rec2 = chaos.penalty_cost_factor(GAUSS, low, 150, seed=6)
    assert rec2.value >= 1.0

    z = chaos.ChaosParams(q=2, gamma_hat=0.0, N=16)
    rec3 = chaos.penalty_cost_factor(GAUSS, z, 150, seed=6)
    assert rec3.value == 1.0


def test_x_statistic_single_step():
    path = walk.WalkPath(np.array([[0, 0], [1, 0]]))
    assert chaos.x_statistic(path, 1, 1) == pytest.approx(0.75, abs=1e-14)


def test_x_statistic_q1_direct():
    N = 4
    path = walk.sample_path(2, N, seed=9)
    table = walk.build_kernel(2, N)
    total = 0.0
    for t in range(1, N + 1):
        st = path.position(t)
        for y in box_sites(N):
            total += table.prob(t, (st[0] - y[0], st[1] - y[1]))
    expect = total / N
    assert chaos.x_statistic(path, 1, N) == pytest.approx(expect, rel=1e-12)


def test_x_statistic_q2_direct():
    N = 6
    path = walk.sample_path(2, N, seed=14)
    table = walk.build_kernel(2, N)
    total = 0.0
    for t1 in range(1, N + 1):
        s1 = path.position(t1)
        first = sum(
            table.prob(t1, (s1[0] - y[0], s1[1] - y[1]))
            for y in box_sites(N)
        )
        for t2 in range(t1 + 1, N + 1):
            s2 = path.position(t2)
            gap = table.prob(t2 - t1, (s2[0] - s1[0], s2[1] - s1[1]))
            total += first * gap
    expect = total / N
    assert chaos.x_statistic(path, 2, N) == pytest.approx(expect, rel=1e-12)


def test_x_statistic_kernel_matches_closed_form():
    N = 8
    path = walk.sample_path(2, N, seed=30)
    table = walk.build_kernel(2, N)
    a = chaos.x_statistic(path, 2, N)
    b = chaos.x_statistic(path, 2, N, kernel=table)
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(DegenerateInputError):
        chaos.x_statistic(path, 2, N, kernel=walk.build_kernel(2, 4))


def test_x_statistic_verbatim_reading():
    N = 4
    path = walk.sample_path(2, N, seed=11)
    table = walk.build_kernel(2, N)
    nbox = len(box_sites(N))
    total = 0.0
    for t in range(1, N + 1):
        st = path.position(t)
        s0 = path.position(0)
        total += table.prob(t, (st[0] - s0[0], st[1] - s0[1]))
    expect = nbox * total / N
    got = chaos.x_statistic(path, 1, N, verbatim=True)
    assert got == pytest.approx(expect, rel=1e-12)


def test_x_statistic_validation():
    path = walk.sample_path(2, 4, seed=2)
    with pytest.raises(DegenerateInputError):
        chaos.x_statistic(path, 2, 8)
    with pytest.raises(DegenerateInputError):
        chaos.x_statistic(path, 0, 4)


def test_l_statistic_edges():
    N = 16
    path = walk.sample_path(2, N, seed=18)
    assert chaos.l_statistic(path, 1, N, 3.0) == 1.0
    for q in (2, 3):
        full = chaos.l_statistic(path, q, N, math.inf)
        assert full == pytest.approx(moments.dnq(N, q), rel=1e-12)
    # at C2 = 0 the window only fires on exact coincidences, so a
    # straight path scores zero
    straight = walk.WalkPath(
        np.stack([np.arange(N + 1), np.zeros(N + 1, dtype=np.int64)],
                 axis=1)
    )
    assert chaos.l_statistic(straight, 2, N, 0.0) == 0.0
    revisits = chaos.l_statistic(path, 2, N, 0.0)
    assert 0.0 <= revisits <= chaos.l_statistic(path, 2, N, 1.0)


def test_l_statistic_bounds_and_monotone():
    N = 32
    for k in range(20):
        path = walk.sample_path(2, N, seed=500 + k)
        d = moments.dnq(N, 2)
        l1 = chaos.l_statistic(path, 2, N, 1.0)
        l4 = chaos.l_statistic(path, 2, N, 4.0)
        l8 = chaos.l_statistic(path, 2, N, 8.0)
        assert 0.0 <= l1 <= l4 <= l8 <= d + 1e-12


def test_l_statistic_start_check():
    path = walk.sample_path(2, 8, seed=3)
    chaos.l_statistic(path, 2, 8, 2.0, x=(0, 0))
    with pytest.raises(DegenerateInputError):
        chaos.l_statistic(path, 2, 8, 2.0, x=(1, 0))


def test_calibrate_c2_fixture():
    best, table = chaos.calibrate_c2(2, 64, 200, seed=9)
    assert best in (1.0, 2.0, 4.0, 8.0)
    assert table[best] >= 0.9
    # the scan is monotone in C2
    vals = [table[c] for c in sorted(table)]
    assert vals == sorted(vals)


def test_x_statistic_median_floor():
    # calibrated floor: median X across walks stays above 0.2 log N at
    # q = 2 (the typical value is about 0.22 log N)
    xs = []
    for k in range(100):
        path = walk.sample_path(2, 256, seed=env.rng.task_seed(900, k))
        xs.append(chaos.x_statistic(path, 2, 256))
    assert float(np.median(xs)) >= 0.2 * math.log(256)


def test_tilted_mean_formula_gamma_zero():
    p = chaos.ChaosParams(q=2, gamma_hat=0.0, N=16)
    path = walk.sample_path(2, 16, seed=4)
    assert chaos.tilted_chaos_mean_formula(GAUSS, p, path) == 0.0


def test_tilted_mean_identity_q1():
    p = chaos.ChaosParams(q=1, gamma_hat=1.0, N=16)
    path = walk.sample_path(2, 16, seed=41)
    beta = 0.4
    formula = chaos.tilted_chaos_mean_formula(GAUSS, p, path, beta=beta)
    rec = chaos.tilted_chaos_mean_mc(GAUSS, p, path, 400, seed=7, beta=beta)
    assert abs(rec.value - formula) < 4 * rec.std_error


def test_tilted_mean_identity_q2_rademacher():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    path = walk.sample_path(2, 16, seed=42)
    beta = 0.5
    formula = chaos.tilted_chaos_mean_formula(RAD, p, path, beta=beta)
    rec = chaos.tilted_chaos_mean_mc(RAD, p, path, 400, seed=8, beta=beta)
    assert abs(rec.value - formula) < 4 * rec.std_error


def test_tilted_mean_zero_beta_reduces_to_q():
    p = chaos.ChaosParams(q=1, gamma_hat=1.0, N=16)
    path = walk.sample_path(2, 16, seed=43)
    rec = chaos.tilted_chaos_mean_mc(GAUSS, p, path, 300, seed=9, beta=0.0)
    assert abs(rec.value) < 4 * rec.std_error


def test_tilted_mean_grows_with_c1():
    path = walk.sample_path(2, 64, seed=44)
    vals = []
    for c1 in (1.0, 2.0, 4.0):
        p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=64, C1=c1)
        vals.append(chaos.tilted_chaos_mean_formula(GAUSS, p, path))
    assert vals[0] < vals[1] < vals[2]


def test_tilted_variance():
    p = chaos.ChaosParams(q=2, gamma_hat=1.0, N=16)
    path = walk.sample_path(2, 16, seed=45)
    rec = chaos.tilted_chaos_variance_mc(GAUSS, p, path, 200, seed=10)
    assert rec.value >= 0.0
    z = chaos.ChaosParams(q=2, gamma_hat=0.0, N=16)
    zero = chaos.tilted_chaos_variance_mc(GAUSS, z, path, 100, seed=10)
    assert zero.value == 0.0


def test_v_statistic_gamma_zero():
    field = env.EnvironmentField(
        model=GAUSS, seed=1, time_range=(1, 8),
        spatial_box=((-12, 12), (-12, 12)),
    )
    assert chaos.v_statistic(field, 0.0, 8) == 0.0


def test_v_statistic_two_step_closed_form():
    N = 2
    field = env.EnvironmentField(
        model=GAUSS, seed=19, time_range=(1, N),
        spatial_box=((-4, 4), (-4, 4)),
    )
    g = 0.9 / math.sqrt(math.log(N))
    lam = env.cumulant(GAUSS, g)

    def e(j, y):
        return math.exp(g * field.eta_at(j, y) - lam)

    total = 0.0
    size = 0
    for y in box_sites(N):
        wy = 0.0
        for y1 in neighbors(y):
            for y2 in neighbors(y1):
                wy += 0.0625 * e(1, y1) * e(2, y2)
        total += wy - 1.0
        size += 1
    expect = math.sqrt(math.log(N)) / N * total
    got = chaos.v_statistic(field, 0.9, N)
    assert got == pytest.approx(expect, abs=1e-12)


def test_v_statistic_forward_backward_agree():
    field = env.EnvironmentField(
        model=RAD, seed=23, time_range=(1, 4),
        spatial_box=((-8, 8), (-8, 8)),
    )
    b = chaos.v_statistic(field, 1.0, 4, method="backward")
    f = chaos.v_statistic(field, 1.0, 4, method="forward")
    assert f == pytest.approx(b, abs=1e-10)
    with pytest.raises(DegenerateInputError):
        chaos.v_statistic(field, 1.0, 4, method="sideways")


def test_v_statistic_mean_zero():
    m = 400
    vals = np.empty(m)
    N = 8
    for k in range(m):
        field = env.EnvironmentField(
            model=GAUSS, seed=env.rng.task_seed(600, k), time_range=(1, N),
            spatial_box=((-2 * N, 2 * N), (-2 * N, 2 * N)),
        )
        vals[k] = chaos.v_statistic(field, 1.0, N)
    se = vals.std(ddof=1) / math.sqrt(m)
    assert abs(vals.mean()) < 4 * se


def test_v_second_moment_gamma_zero():
    assert chaos.v_second_moment_exact(GAUSS, 0.0, 16) == 0.0


def test_v_second_moment_two_step_enumeration():
    N = 2
    g = 1.0 / math.sqrt(math.log(N))
    w = 1.0 + moments.lambda1(GAUSS, g)
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    sites = box_sites(N)
    total = 0.0
    for ya in sites:
        for yb in sites:
            acc = 0.0
            for sa in itertools.product(steps, repeat=N):
                pa = [ya]
                for dx in sa:
                    pa.append((pa[-1][0] + dx[0], pa[-1][1] + dx[1]))
                for sb in itertools.product(steps, repeat=N):
                    pb = [yb]
                    for dx in sb:
                        pb.append((pb[-1][0] + dx[0], pb[-1][1] + dx[1]))
                    hits = sum(
                        1 for i in range(1, N + 1) if pa[i] == pb[i]
                    )
                    acc += w ** hits
            total += acc / 16.0 ** N - 1.0
    expect = math.log(N) / N ** 2 * total
    got = chaos.v_second_moment_exact(GAUSS, 1.0, N)
    assert got == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("N", [4, 8, 16])
def test_v_second_moment_matches_dp(N):
    renewal = chaos.v_second_moment_exact(GAUSS, 1.0, N)
    dp = chaos._v_second_moment_dp(GAUSS, 1.0, N)
    assert renewal == pytest.approx(dp, rel=1e-10)


def test_v_second_moment_bounded_trend():
    a = chaos.v_second_moment_exact(GAUSS, 1.0, 64)
    b = chaos.v_second_moment_exact(GAUSS, 1.0, 256)
    hi, lo = max(a, b), min(a, b)
    assert hi / lo <= 2.0


def test_v_second_moment_cap():
    with pytest.raises(ResourceCapError):
        chaos.v_second_moment_exact(GAUSS, 1.0, 2 ** 13)


def test_v_tilted_w_one_gives_zero():
    path = walk.sample_path(2, 8, seed=3)
    res = chaos.v_tilted_mean(GAUSS, 0.0, 1.0, 8, path)
    assert res.w == 1.0
    assert res.raw == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_v_tilted_two_step_enumeration():
    N = 2
    path = walk.WalkPath(np.array([[0, 0], [1, 0], [1, 1]]))
    res = chaos.v_tilted_mean(GAUSS, 1.6, 1.2, N, path)
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    acc = 0.0
    for sb in itertools.product(steps, repeat=N):
        pos = (0, 0)
        hits = 0
        for i, dx in enumerate(sb, start=1):
            pos = (pos[0] + dx[0], pos[1] + dx[1])
            if pos == path.position(i):
                hits += 1
        acc += res.w ** hits
    expect_raw = acc / 16.0
    assert res.raw == pytest.approx(expect_raw, rel=1e-12)
    assert res.value == pytest.approx(
        math.log(N) / N * (expect_raw - 1.0), rel=1e-12
    )


def test_v_tilted_full_enumeration():
    N = 2
    path = walk.WalkPath(np.array([[0, 0], [0, 1], [1, 1]]))
    got = chaos.v_tilted_mean_full(GAUSS, 1.6, 1.2, N, path)
    w = chaos._coincidence_weight(GAUSS, 1.6, 1.2, N)
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    total = 0.0
    for y in box_sites(N):
        acc = 0.0
        for sb in itertools.product(steps, repeat=N):
            pos = y
            hits = 0
            for i, dx in enumerate(sb, start=1):
                pos = (pos[0] + dx[0], pos[1] + dx[1])
                if pos == path.position(i):
                    hits += 1
            acc += w ** hits
        total += acc / 16.0 - 1.0
    expect = math.sqrt(math.log(N)) / N * total
    assert got == pytest.approx(expect, rel=1e-12)


def test_v_tilted_annealed_two_step_enumeration():
    N = 2
    got = chaos.v_tilted_mean_annealed(GAUSS, 1.6, 1.2, N)
    w = chaos._coincidence_weight(GAUSS, 1.6, 1.2, N)
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    total = 0.0
    for y in box_sites(N):
        acc = 0.0
        for sa in itertools.product(steps, repeat=N):
            pa = (0, 0)
            trace = []
            for dx in sa:
                pa = (pa[0] + dx[0], pa[1] + dx[1])
                trace.append(pa)
            for sb in itertools.product(steps, repeat=N):
                pb = y
                hits = 0
                for i, dx in enumerate(sb):
                    pb = (pb[0] + dx[0], pb[1] + dx[1])
                    if pb == trace[i]:
                        hits += 1
                acc += w ** hits
        total += acc / 256.0 - 1.0
    assert got.raw == pytest.approx(total, rel=1e-12)
    assert got.value == pytest.approx(
        math.sqrt(math.log(N)) / N * total, rel=1e-12
    )


def test_v_tilted_annealed_growth_signature():
    # at gamma_hat = 1.2, beta_hat = 1.6 the coincidence weight satisfies
    # (w - 1) log N > pi * lambda''(0), the regime where the start-summed
    # tilted mean of V^N grows with the horizon
    r64 = chaos.v_tilted_mean_annealed(GAUSS, 1.6, 1.2, 64)
    r256 = chaos.v_tilted_mean_annealed(GAUSS, 1.6, 1.2, 256)
    for N, r in ((64, r64), (256, r256)):
        assert (r.w - 1.0) * math.log(N) > math.pi * env.lambda_pp0(GAUSS)
    assert r256.value > r64.value


def test_v_tilted_expected_matches_sampled_paths():
    N = 16
    expected = chaos.v_tilted_mean_expected(GAUSS, 1.6, 1.2, N)
    m = 300
    vals = np.empty(m)
    for k in range(m):
        path = walk.sample_path(2, N, seed=env.rng.task_seed(700, k))
        vals[k] = chaos.v_tilted_mean(GAUSS, 1.6, 1.2, N, path).raw
    se = vals.std(ddof=1) / math.sqrt(m)
    assert abs(vals.mean() - expected.raw) < 4 * se


def test_v_tilted_validation():
    path = walk.sample_path(2, 8, seed=3)
    with pytest.raises(DegenerateInputError):
        chaos.v_tilted_mean(GAUSS, 1.0, 1.0, 16, path)
    off = walk.sample_path(2, 8, seed=3, start=(50, 0))
    with pytest.raises(DegenerateInputError):
        chaos.v_tilted_mean(GAUSS, 1.0, 1.0, 8, off)
    with pytest.raises(DegenerateInputError):
        chaos.v_tilted_mean_annealed(GAUSS, 1.0, 1.0, 8, x=(40, 0))


def test_tilted_measure_spec():
    path = walk.sample_path(2, 8, seed=1)
    spec = chaos.TiltedMeasureSpec(path=path, beta=0.7)
    assert spec.pair == (path, 0.7)
