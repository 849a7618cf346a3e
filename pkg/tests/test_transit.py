import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq
from scipy.special import logsumexp

from modalgame.choice import BehaviorParams, IncomeClassParams
from modalgame.equilibrium import default_initial_strategies
from modalgame.errors import Infeasible
from modalgame.scenario import random_scenario
from modalgame.strategies import TncStrategy, TransitStrategy
from modalgame.transit import (
    TransitSolverConfig,
    TransitContext,
    certify_concavity,
    concavity_rhs,
    largest_fixed_point,
    solve_Nhat,
    solve_transit_best_response,
    solve_transit_inner,
    solve_transit_inner_joint,
    transit_profit,
    transit_ridership,
)

from conftest import make_two_zone
from oracles import batch_costs, batch_demand, transit_dense_grid, transit_oracle

TNC = TncStrategy(6.7, [1.35, 1.43], [4.1, 3.6])
TWO_CLASSES = (IncomeClassParams(6.0, 3.0, 1.2, 8.0), IncomeClassParams(14.0, 6.0, 0.8, 16.0))


def with_epsilon(s, eps):
    b = s.behavior
    return s.with_updates(behavior=BehaviorParams(eps, b.v_a, b.v_p, b.v_w, b.classes, b.outside_cost))


def zero_wait_costs(s, tnc, r_p):
    """(M, M, K, 6) oracle costs with transit waits removed (frequencies effectively infinite)."""
    return batch_costs(s, tnc.b, tnc.r[None], tnc.n_idle[None], r_p, np.full((1, s.network.n_lines), 1e15))[0][0]


def rhs_direct(s, tnc, r_p, od, n):
    """Concavity right-hand side for one OD from raw logit shares at transit wait 1/N."""
    i, j = od
    alpha = np.array([c.alpha for c in s.behavior.classes])
    eps = s.behavior.epsilon
    c0 = zero_wait_costs(s, tnc, r_p)[i, j]  # (K, 6)
    n = np.asarray(n, dtype=float)[..., None, None]
    c = c0 + np.concatenate([np.zeros(1), np.ones(4), np.zeros(1)]) * alpha[:, None] / n
    z = -eps * c
    p = np.exp(logsumexp(z[..., 1:5], axis=-1) - logsumexp(z, axis=-1))
    lam0 = s.demand0[i, j]
    q = lam0 * p * (1 - p)
    return 0.5 * eps * np.sum(alpha**2 * q * (1 - 2 * p), axis=-1) / np.sum(alpha * q, axis=-1), p


# -- ridership and profit ------------------------------------------------------


def test_uniform_logit_ridership():
    s = with_epsilon(make_two_zone(demand=((150.0, 150.0), (150.0, 150.0))), 0.0)
    assert transit_ridership(TransitStrategy(1.0, [5.0]), TNC, s) == pytest.approx(400.0)


@given(st.floats(0.0, 2.9), st.floats(0.01, 0.5))
def test_fare_increase_lowers_ridership(r, dr):
    s = make_two_zone()
    lo = transit_ridership(TransitStrategy(r, [5.0]), TNC, s)
    hi = transit_ridership(TransitStrategy(r + dr, [5.0]), TNC, s)
    assert hi < lo


@pytest.mark.parametrize("seed", range(4))
def test_ridership_and_profit_match_summation_oracle(seed):
    s = random_scenario(seed, n_zones=4, n_classes=2, n_lines=3)
    rng = np.random.default_rng(seed)
    tnc = TncStrategy(rng.uniform(1, 10), rng.uniform(0.5, 4, 4), rng.uniform(1, 100, 4))
    tr = TransitStrategy(rng.uniform(0, 3), rng.uniform(0.5, 20, s.network.n_lines))
    ride, prof = transit_oracle(s, tnc, tr.r_p, tr.f[None])
    assert transit_ridership(tr, tnc, s) == pytest.approx(ride[0], rel=1e-10)
    assert transit_profit(tr, tnc, s) == pytest.approx(prof[0], rel=1e-10)


def test_zero_demand_profit_is_line_cost():
    s = make_two_zone(demand=((0.0, 0.0), (0.0, 0.0)), n_lines=2, op_cost=100.0, second_cost=100.0)
    assert transit_profit(TransitStrategy(1.0, [10.0, 10.0]), TNC, s) == pytest.approx(-2000.0)


def test_free_lines_profit_is_revenue():
    s = make_two_zone(op_cost=0.0)
    tr = TransitStrategy(1.3, [4.0])
    lam = transit_oracle(s, TNC, 1.3, tr.f[None])[0]
    costs, _, _ = batch_costs(s, TNC.b, TNC.r[None], TNC.n_idle[None], 1.3, tr.f[None])
    assert lam[0] > 0 and costs.shape[0] == 1
    riders = batch_demand(s, costs)[0][..., 1:5].sum(axis=(-1, -2))
    assert transit_profit(tr, TNC, s) == pytest.approx(1.3 * np.sum(riders * s.network.transit_distance), rel=1e-12)


# -- change of variables and derivatives --------------------------------------


@given(st.integers(0, 1000))
def test_wait_and_idle_forms_agree(seed):
    s = random_scenario(seed % 6, n_zones=3, n_lines=3)
    rng = np.random.default_rng(seed)
    ctx = TransitContext(s, TncStrategy(5.0, rng.uniform(1, 3, 3), rng.uniform(1, 40, 3)))
    r_p, f = rng.uniform(0, 3), rng.uniform(0.5, 30, s.network.n_lines)
    ride = ctx.evaluate(r_p, f)[0]
    assert ctx.ridership_np(r_p, 1.0 / ctx.waits(f)) == pytest.approx(ride, rel=1e-12)


def random_points(ctx, rng, n):
    for _ in range(n):
        yield rng.uniform(0, ctx.r_max), rng.uniform(1.0 / ctx.w_max, 10.0, (ctx.m, ctx.m))


@pytest.mark.parametrize("seed", range(3))
def test_appendix_a_derivatives(seed):
    s = random_scenario(seed, n_zones=3, n_classes=2)
    ctx = TransitContext(s, TncStrategy(5.0, [1.5, 2.0, 1.0], [5.0, 10.0, 20.0]))
    h = 1e-5
    for r_p, n in random_points(ctx, np.random.default_rng(seed), 5):
        g = ctx.ridership_gradient_np(r_p, n)
        hd = ctx.ridership_hessian_diag_np(r_p, n)
        for i in range(3):
            for j in range(3):
                e = np.zeros_like(n)
                e[i, j] = h
                fd = (ctx.ridership_np(r_p, n + e) - ctx.ridership_np(r_p, n - e)) / (2 * h)
                assert g[i, j] == pytest.approx(fd, abs=1e-5)
                gp, gm = ctx.ridership_gradient_np(r_p, n + e), ctx.ridership_gradient_np(r_p, n - e)
                fd2 = (gp - gm) / (2 * h)
                assert hd[i, j] == pytest.approx(fd2[i, j], abs=1e-5)
                off = np.delete(fd2.ravel(), i * 3 + j)
                assert np.max(np.abs(off)) <= 1e-6


def test_g1_derivative_identity():
    s = random_scenario(1, n_zones=3)
    ctx = TransitContext(s, TncStrategy(5.0, [1.5, 2.0, 1.0], [5.0, 10.0, 20.0]))
    n = np.full((3, 3), 2.5)
    h = 1e-6
    fd = (ctx.g_functions(1.0, n + h)[1] - ctx.g_functions(1.0, n - h)[1]) / (2 * h)
    np.testing.assert_allclose(ctx.dg1_dn(1.0, n), fd, rtol=1e-6)
    g0, g1 = ctx.g_functions(1.0, n)
    np.testing.assert_allclose(g1 / g0, ctx.shares_at_wait(1.0, 1.0 / n), rtol=1e-12)


# -- concavity right-hand side and fixed points -------------------------------


@pytest.mark.parametrize("n_p", [0.3, 1.0, 4.0])
def test_rhs_single_class_collapse(n_p):
    s = make_two_zone()
    alpha, eps = s.behavior.classes[0].alpha, s.behavior.epsilon
    direct, p = rhs_direct(s, TNC, 1.0, (0, 1), n_p)
    assert concavity_rhs(1.0, n_p, (0, 1), s, TNC) == pytest.approx(0.5 * eps * alpha * (1 - 2 * p[0]), rel=1e-10)
    assert concavity_rhs(1.0, n_p, (0, 1), s, TNC) == pytest.approx(float(direct), rel=1e-10)


def test_rhs_vanishes_at_even_split():
    s = make_two_zone()
    share = lambda n: rhs_direct(s, TNC, 0.0, (0, 1), n)[1][0] - 0.5
    n_half = brentq(share, 0.01, 100.0, xtol=1e-14)
    assert concavity_rhs(0.0, n_half, (0, 1), s, TNC) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_rhs_two_classes_direct(seed):
    s = make_two_zone(classes=TWO_CLASSES)
    rng = np.random.default_rng(seed)
    r_p, n_p = rng.uniform(0, 3), rng.uniform(0.1, 10)
    direct, _ = rhs_direct(s, TNC, r_p, (1, 0), n_p)
    assert concavity_rhs(r_p, n_p, (1, 0), s, TNC) == pytest.approx(float(direct), rel=1e-9)


def test_rhs_zero_wait_capacity_limit():
    # a single class, or equal alphas: the closed-form limit is attained
    for s in (make_two_zone(), make_two_zone(classes=(TWO_CLASSES[0], TWO_CLASSES[0]))):
        ctx = TransitContext(s, TNC)
        got = ctx.concavity_rhs(1.0, np.full((2, 2), 1e-6))
        np.testing.assert_allclose(got, ctx.rhs_limit_zero(), rtol=1e-9)
    # unequal alphas: the class with the smallest alpha dominates as N -> 0
    s = make_two_zone(classes=TWO_CLASSES)
    got = TransitContext(s, TNC).concavity_rhs(1.0, np.full((2, 2), 1e-6))
    np.testing.assert_allclose(got, 0.5 * s.behavior.epsilon * TWO_CLASSES[0].alpha, rtol=1e-9)


def test_fixed_point_synthetic_rhs():
    assert largest_fixed_point(lambda n: np.full_like(n, 2.5), 30.0) == pytest.approx(2.5, abs=1e-12)
    assert largest_fixed_point(lambda n: -np.ones_like(n), 30.0) == 0.0
    assert largest_fixed_point(lambda n: np.full_like(n, 50.0), 30.0) == 30.0


def test_nhat_zero_when_transit_dominates():
    # with a near-flat logit the transit share stays above one half on the whole scan,
    # so RHS <= 0 < N everywhere
    s = with_epsilon(make_two_zone(demand=((0.0, 100.0), (0.0, 0.0))), 1e-8)
    n_grid = np.geomspace(1e-6, 10.0 / s.w_p_max, 400)
    direct, p = rhs_direct(s, TNC, 0.0, (0, 1), n_grid)
    assert np.all(p[:, 0] >= 0.5) and np.all(direct <= 0)
    assert solve_Nhat(0.0, (0, 1), s, TNC) == 0.0


def test_nhat_matches_dense_scan_on_sf(sf):
    tnc, _ = default_initial_strategies(sf)
    for od in [(0, 1), (4, 9), (12, 3)]:
        grid = np.arange(1e-6, 100.0, 1e-4)
        with np.errstate(invalid="ignore"):
            vals = np.concatenate([rhs_direct(sf, tnc, 1.5, od, g)[0] for g in np.array_split(grid, 20)])
        vals = np.nan_to_num(vals, nan=0.0)
        ok = np.nonzero(vals - grid >= 0)[0]
        scan = grid[ok[-1]] if ok.size else 0.0
        assert solve_Nhat(1.5, od, sf, tnc) == pytest.approx(scan, abs=2e-4)


# -- certificate ---------------------------------------------------------------


def test_certificate_threshold_logic():
    s = make_two_zone()
    loose = certify_concavity(s.with_updates(w_p_max=1e9), TNC)
    assert loose.n_bar.max() > 0 and not loose.holds
    flat = with_epsilon(s, 1e-9)
    cert = certify_concavity(flat.with_updates(w_p_max=1.0), TNC)
    assert np.all(cert.n_bar <= 1e-6)
    assert cert.holds


def test_certificate_holds_on_sf(sf):
    tnc, _ = default_initial_strategies(sf)
    cert = certify_concavity(sf, tnc)
    assert sf.w_p_max == pytest.approx(1.0 / 3.0)
    assert cert.holds and cert.min_margin > 0
    np.testing.assert_allclose(cert.margins, cert.threshold - cert.n_bar)


def test_midpoint_concavity_when_certified():
    s = make_two_zone(classes=TWO_CLASSES)
    ctx = TransitContext(s, TNC)
    assert certify_concavity(s, TNC, ctx=ctx).holds
    rng = np.random.default_rng(0)
    lo = 1.0 / s.w_p_max
    for _ in range(200):
        r_p = rng.uniform(0, 3)
        a, b = rng.uniform(lo, 40, (2, 2, 2))
        mid = ctx.ridership_np(r_p, 0.5 * (a + b))
        assert mid >= 0.5 * (ctx.ridership_np(r_p, a) + ctx.ridership_np(r_p, b)) - 1e-9


# -- best response ---------------------------------------------------------------


def test_free_unconstrained_lines_run_at_top_frequency():
    s = make_two_zone(n_lines=2, op_cost=0.0, second_cost=0.0, pi_0=-np.inf)
    tr, _, _ = solve_transit_best_response(TNC, s, TransitSolverConfig(certify=False))
    np.testing.assert_allclose(tr.f, 30.0)


def test_binding_profit_floor_is_respected():
    s = make_two_zone(pi_0=-30.0)
    tr, ride, _ = solve_transit_best_response(TNC, s, TransitSolverConfig(certify=False))
    assert transit_profit(tr, TNC, s) - s.pi_0 >= -1e-6
    assert transit_ridership(tr, TNC, s) == pytest.approx(ride, rel=1e-10)
    # the floor binds: dropping it raises ridership
    _, free, _ = solve_transit_best_response(TNC, s.with_updates(pi_0=-1e9), TransitSolverConfig(certify=False))
    assert free > ride


def test_infeasible_floor_raises():
    with pytest.raises(Infeasible):
        solve_transit_best_response(TNC, make_two_zone(pi_0=1e6), TransitSolverConfig(certify=False))


def test_best_response_beats_dense_grid_two_lines():
    s = make_two_zone(n_lines=2, op_cost=10.0, pi_0=-20.0)
    tr, ride, flag = solve_transit_best_response(TNC, s)
    assert flag
    best = transit_dense_grid(s, TNC)
    assert ride >= best - 1e-3 * best
    assert transit_profit(tr, TNC, s) >= s.pi_0 - 1e-6


def test_joint_inner_solve_agrees_with_eliminated_form():
    s = make_two_zone(n_lines=2, op_cost=10.0, pi_0=-20.0)
    ctx = TransitContext(s, TNC)
    for r_p in (0.3, 1.0, 2.0):
        f, ride, _ = solve_transit_inner(ctx, r_p)
        joint = solve_transit_inner_joint(ctx, r_p)
        assert joint is not None
        assert joint[2] == pytest.approx(ride, rel=1e-4)
