"""Platform side: profit, best response and destination-relaxation profit bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .choice import A, B1, B2, B3, amod_wait_time, base_costs, demand_tensor, fleet_hours
from .errors import EmptyCell, ValidationError
from .network import Partition
from .optim import SmoothProblem, SolverConfig, solve_smooth
from .strategies import TncStrategy


@dataclass(frozen=True)
class TncSolverConfig:
    n_starts: int = 5
    max_inner: int = 400
    tol: float = 1e-8
    # relaxed-cell search
    inner_grid: int = 40
    zoom_grid: int = 9
    screen_inner_grid: int = 12
    screen_levels: int = 4
    polish_top: int = 3


@dataclass(frozen=True, eq=False)
class DestinationStrategy:
    """Per-destination decisions in the relaxed problem: one base fare and per-origin rates/fleets."""

    dest: int
    b: float
    r: np.ndarray
    n_idle: np.ndarray


@dataclass(eq=False)
class CellSolution:
    cell: tuple[int, ...]
    destinations: list[DestinationStrategy]
    value: float
    strategy: TncStrategy  # joint vector realizing ``value``

    def __iter__(self):
        return iter((self.destinations, self.value))


@dataclass(eq=False)
class ProfitBounds:
    upper: float
    lower: float
    candidate_profit: float
    epsilon_abs: float
    epsilon_rel: float
    per_cell_values: list[float]
    blend: TncStrategy | None = field(default=None, repr=False)


class TncContext:
    """Everything the platform objective needs with the transit strategy frozen."""

    def __init__(self, scenario, transit, subsidy=None):
        net, beh = scenario.network, scenario.behavior
        self.scenario = scenario
        self.m = net.n_zones
        self.base = np.ascontiguousarray(base_costs(scenario, transit, subsidy))
        self.lam0 = np.ascontiguousarray(scenario.demand0)
        self.la = np.ascontiguousarray(net.road_distance)
        self.d = np.ascontiguousarray(net.firstmile_distance)
        alpha, _, gamma, _ = beh.weights()
        self.alpha, self.gamma = alpha, gamma
        self.eps, self.v_a, self.c_av = beh.epsilon, beh.v_a, scenario.c_av
        self.A = net.matching_scale
        self.floor = scenario.policy.idle_floor(self.A)
        self.n_max = np.maximum(scenario.n_idle_max, 10.0 * self.floor)
        self.lower = np.concatenate(([1e-6], np.full(self.m, 1e-6), np.log(self.floor)))
        self.upper = np.concatenate(([scenario.b_max], np.full(self.m, scenario.r_a_max), np.log(self.n_max)))

    # y = (b, r, log N)
    def to_y(self, tnc: TncStrategy) -> np.ndarray:
        return np.clip(np.concatenate(([tnc.b], tnc.r, np.log(tnc.n_idle))), self.lower, self.upper)

    def from_y(self, y) -> TncStrategy:
        m = self.m
        return TncStrategy(float(y[0]), y[1 : 1 + m].copy(), np.exp(y[1 + m :]))

    def margin_sum(self, b, r, w, origin_w=None, dest_w=None, want_grad=True):
        ones = np.ones(self.m)
        return kernels.tnc_objective(
            self.lam0, self.base, self.la, self.d, self.alpha, self.gamma,
            self.eps, self.c_av, self.v_a, float(b), np.ascontiguousarray(r), np.ascontiguousarray(w),
            ones if origin_w is None else origin_w, ones if dest_w is None else dest_w, want_grad,
        )

    def value_grad_y(self, y, dest_w=None, idle_weight=1.0):
        m = self.m
        b, r, n = y[0], y[1 : 1 + m], np.exp(y[1 + m :])
        w = self.A / np.sqrt(n)
        v, g_b, g_r, g_w = self.margin_sum(b, r, w, dest_w=dest_w)
        v -= self.c_av * idle_weight * n.sum()
        # dw/dlogN = -w/2, dN/dlogN = N
        g_y = g_w * (-0.5 * w) - self.c_av * idle_weight * n
        return v, np.concatenate(([g_b], g_r, g_y))

    def profit(self, tnc: TncStrategy) -> float:
        w = amod_wait_time(self.A, tnc.n_idle)
        v = self.margin_sum(tnc.b, tnc.r, w, want_grad=False)[0]
        return v - self.c_av * float(np.sum(tnc.n_idle))


def tnc_profit(tnc: TncStrategy, transit, scenario, form: str = "revenue") -> float:
    """Hourly platform profit.

    ``form="revenue"``: fare revenue over the four AMoD-using modes minus
    ``c_av`` times the fleet size from the conservation law.
    ``form="margin"``: per-trip margins minus idle-vehicle cost (same number,
    computed by the compiled kernel).
    """
    if form == "margin":
        return TncContext(scenario, transit).profit(tnc)
    if form != "revenue":
        raise ValueError(f"unknown form {form!r}")
    net = scenario.network
    dem = demand_tensor(scenario, tnc, transit)
    lam = dem.by_mode
    la = net.road_distance[:, :, None]
    d = net.firstmile_distance
    di, dj = d[:, None, None], d[None, :, None]
    ri, rj = tnc.r[:, None, None], tnc.r[None, :, None]
    b = tnc.b
    revenue = (
        lam[..., A] * (b + ri * la)
        + lam[..., B1] * (b + ri * di)
        + lam[..., B2] * (b + rj * dj)
        + lam[..., B3] * (2 * b + ri * di + rj * dj)
    ).sum()
    w = amod_wait_time(net.matching_scale, tnc.n_idle)
    n_total = fleet_hours(dem, w, net, scenario.behavior.v_a, tnc.n_idle)
    return float(revenue - scenario.c_av * n_total)


def _spread_starts(ctx: TncContext, n: int) -> list[np.ndarray]:
    """Uniform-strategy starts spread over the box (fares geometric, fleets geometric, paired in opposite order)."""
    m = ctx.m
    q = np.geomspace(0.02, 0.5, n) if n > 1 else np.array([0.1])
    lo_n = np.maximum(np.exp(ctx.lower[1 + m :]), 1.0)
    hi_n = np.maximum(ctx.n_max / 10.0, lo_n * 2)
    starts = []
    for s in range(n):
        b = ctx.upper[0] * q[s]
        r = ctx.upper[1] * q[s]
        frac = (n - 1 - s) / max(n - 1, 1)
        logn = np.log(lo_n) + frac * (np.log(hi_n) - np.log(lo_n))
        y = np.concatenate(([b], np.full(m, r), logn))
        starts.append(np.clip(y, ctx.lower, ctx.upper))
    return starts


def _local_solve(ctx, starts, cfg, dest_w=None, idle_weight=1.0):
    def f(y):
        return ctx.value_grad_y(y, dest_w, idle_weight)[0]

    def g(y):
        return ctx.value_grad_y(y, dest_w, idle_weight)[1]

    problem = SmoothProblem(f, ctx.lower, ctx.upper, gradient=g)
    scale = np.ones_like(ctx.lower)
    return solve_smooth(problem, starts, SolverConfig(tol=cfg.tol, max_inner=cfg.max_inner, x_scale=scale))


def solve_tnc_best_response(
    transit, scenario, config: TncSolverConfig | None = None, warm_start: TncStrategy | None = None,
    return_report: bool = False,
):
    """Multi-start maximization of platform profit over (b, r, N^I) with transit fixed.

    The minimum service level enters as a lower bound on idle fleets. Idle
    fleets are searched in log space.
    """
    cfg = config or TncSolverConfig()
    ctx = TncContext(scenario, transit)
    starts = _spread_starts(ctx, cfg.n_starts)
    if warm_start is not None:
        starts.insert(0, ctx.to_y(warm_start))
    rep = _local_solve(ctx, starts, cfg)
    best = ctx.from_y(rep.x_star)
    # exact box compliance for the wait cap
    best = TncStrategy(best.b, best.r, np.maximum(best.n_idle, ctx.floor))
    return (best, rep) if return_report else best


# ---------------------------------------------------------------- relaxation


class _CellModel:
    """Objective of one partition cell: destinations in the cell, all origins."""

    def __init__(self, ctx: TncContext, cell):
        m = ctx.m
        self.ctx = ctx
        self.cell = np.array(sorted(cell), dtype=int)
        self.out = np.array([i for i in range(m) if i not in set(cell)], dtype=int)
        self.dest_w = np.zeros(m)
        self.dest_w[self.cell] = 1.0
        self.idle_weight = len(self.cell) / m
        c, o = self.cell, self.out
        self.sub = dict(
            lam0=np.ascontiguousarray(ctx.lam0[np.ix_(o, c)]),
            base=np.ascontiguousarray(ctx.base[np.ix_(o, c)]),
            la=np.ascontiguousarray(ctx.la[np.ix_(o, c)]),
            d_orig=np.ascontiguousarray(ctx.d[o]),
            d_dest=np.ascontiguousarray(ctx.d[c]),
        )
        origin_w = np.zeros(m)
        origin_w[c] = 1.0
        self.master_origin_w = origin_w

    def master_value(self, b, r_c, w_c, n_c):
        """Terms with both ends inside the cell plus the cell's own idle cost."""
        ctx = self.ctx
        r = np.zeros(ctx.m)
        w = np.ones(ctx.m)
        r[self.cell], w[self.cell] = r_c, w_c
        v = ctx.margin_sum(b, r, w, origin_w=self.master_origin_w, dest_w=self.dest_w, want_grad=False)[0]
        return v - ctx.c_av * self.idle_weight * float(np.sum(n_c))

    def inner_grid_values(self, b, r_c, w_c, r_vals, n_vals):
        """(n_out, G) values of every outside origin at candidate (r, N) pairs."""
        ctx = self.ctx
        o = self.out
        w_vals = ctx.A[o][:, None] / np.sqrt(n_vals)
        v = kernels.origin_grid(
            self.sub["lam0"], self.sub["base"], self.sub["la"], self.sub["d_orig"], self.sub["d_dest"],
            ctx.alpha, ctx.gamma, ctx.eps, ctx.c_av, ctx.v_a, float(b),
            np.ascontiguousarray(r_c, dtype=float), np.ascontiguousarray(w_c, dtype=float),
            np.ascontiguousarray(r_vals), np.ascontiguousarray(w_vals),
        )
        return v - ctx.c_av * self.idle_weight * n_vals

    def inner_solve(self, b, r_c, w_c, n_grid, zoom):
        """Grid search with one zoomed refinement for every outside origin; returns (r, N, total)."""
        ctx = self.ctx
        o = self.out
        if o.size == 0:
            return np.zeros(0), np.zeros(0), 0.0
        m = ctx.m
        lo = ctx.lower[1 + m + o], ctx.upper[1 + m + o]
        r_axis = np.linspace(ctx.lower[1], ctx.upper[1], n_grid)
        t_axis = np.linspace(0.0, 1.0, n_grid)
        rr, tt = np.meshgrid(r_axis, t_axis, indexing="ij")
        rr, tt = rr.ravel(), tt.ravel()
        logn = lo[0][:, None] + tt[None, :] * (lo[1] - lo[0])[:, None]
        r_vals = np.broadcast_to(rr, logn.shape)
        vals = self.inner_grid_values(b, r_c, w_c, r_vals, np.exp(logn))
        k = np.argmax(vals, axis=1)
        rows = np.arange(o.size)
        r_best, y_best = r_vals[rows, k], logn[rows, k]
        if zoom > 1:
            dr = (ctx.upper[1] - ctx.lower[1]) / (n_grid - 1)
            dy = (lo[1] - lo[0]) / (n_grid - 1)
            s = np.linspace(-1.0, 1.0, zoom)
            sr, sy = np.meshgrid(s, s, indexing="ij")
            r2 = np.clip(r_best[:, None] + sr.ravel()[None, :] * dr, ctx.lower[1], ctx.upper[1])
            y2 = np.clip(y_best[:, None] + sy.ravel()[None, :] * dy[:, None], lo[0][:, None], lo[1][:, None])
            v2 = self.inner_grid_values(b, r_c, w_c, r2, np.exp(y2))
            k2 = np.argmax(v2, axis=1)
            r_best, y_best = r2[rows, k2], y2[rows, k2]
            best_vals = v2[rows, k2]
        else:
            best_vals = vals[rows, k]
        return r_best, np.exp(y_best), float(best_vals.sum())

    def value_grad_y(self, y):
        return self.ctx.value_grad_y(y, self.dest_w, self.idle_weight)


def _master_levels(ctx: TncContext, cell, ref_y, n_levels):
    m = ctx.m
    b_levels = np.geomspace(0.5, ctx.upper[0] / 2, n_levels)
    r_levels = np.geomspace(0.25, ctx.upper[1] / 2, n_levels)
    axes = [b_levels]
    for i in cell:
        axes.append(r_levels)
    for i in cell:
        lo, hi = ctx.lower[1 + m + i], ctx.upper[1 + m + i]
        lo2 = max(lo, np.log(0.5))
        axes.append(np.linspace(lo2, max(lo2, hi - np.log(10.0)), n_levels))
    return axes


def solve_relaxed_cell(cell, transit, scenario, config: TncSolverConfig | None = None, reference=None, ctx=None):
    """Maximize the destination-relaxed platform profit restricted to one partition cell.

    Decisions are consistent inside the cell (shared base fare and zone
    strategies) while every outside origin picks its own (rate, fleet) for
    trips into the cell. The search combines a master screening grid over the
    shared variables, per-origin inner grids, and a joint local polish.
    ``reference`` (a full strategy, typically the candidate equilibrium) is
    always among the explored points, so the returned value is at least the
    reference's restricted profit.
    """
    cell = tuple(sorted(int(i) for i in cell))
    if not cell:
        raise EmptyCell("partition cell is empty")
    cfg = config or TncSolverConfig()
    ctx = ctx or TncContext(scenario, transit)
    m = ctx.m
    if any(i < 0 or i >= m for i in cell):
        raise ValidationError(f"cell {cell} has zones outside 0..{m - 1}")
    model = _CellModel(ctx, cell)
    c, o = model.cell, model.out

    def assemble(b, r_c, y_c, r_o, n_o, base_y):
        y = base_y.copy()
        y[0] = b
        y[1 + c] = r_c
        y[1 + m + c] = y_c
        if o.size:
            y[1 + o] = r_o
            y[1 + m + o] = np.log(np.maximum(n_o, 1e-300))
        return np.clip(y, ctx.lower, ctx.upper)

    def master_eval(b, r_c, y_c, grid, zoom):
        n_c = np.exp(y_c)
        w_c = ctx.A[c] / np.sqrt(n_c)
        r_o, n_o, inner = model.inner_solve(b, r_c, w_c, grid, zoom)
        return model.master_value(b, r_c, w_c, n_c) + inner, r_o, n_o

    ref_y = ctx.to_y(reference) if reference is not None else _spread_starts(ctx, 1)[0]
    candidates = []  # (value, y)
    # reference restricted to the cell, evaluated exactly
    candidates.append((model.value_grad_y(ref_y)[0], ref_y))

    n_master = 1 + 2 * len(c)
    if n_master <= 7 and cfg.screen_levels > 1:
        levels = cfg.screen_levels if n_master <= 5 else max(2, cfg.screen_levels - 1)
        axes = _master_levels(ctx, c, ref_y, levels)
        pts = [np.array([ref_y[0], *ref_y[1 + c], *ref_y[1 + m + c]])]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts.extend(np.stack([g.ravel() for g in mesh], axis=1))
        screened = []
        k = len(c)
        for p in pts:
            v, r_o, n_o = master_eval(p[0], p[1 : 1 + k], p[1 + k :], cfg.screen_inner_grid, 1)
            screened.append((v, p, r_o, n_o))
        order = sorted(range(len(screened)), key=lambda n: -screened[n][0])
        for n in order[: cfg.polish_top]:
            v, p, r_o, n_o = screened[n]
            candidates.append((v, assemble(p[0], p[1 : 1 + k], p[1 + k :], r_o, n_o, ref_y)))

    # joint local polish of the cell objective from each candidate
    problem = SmoothProblem(
        lambda y: model.value_grad_y(y)[0], ctx.lower, ctx.upper, gradient=lambda y: model.value_grad_y(y)[1]
    )
    scale = np.ones_like(ctx.lower)
    scfg = SolverConfig(tol=cfg.tol, max_inner=cfg.max_inner, x_scale=scale)
    starts = [y for _, y in candidates]
    rep = solve_smooth(problem, starts, scfg)
    best_y, best_v = rep.x_star, rep.value

    # re-optimize outside origins globally at the polished master, then polish again
    k = len(c)
    if o.size:
        b, r_c, y_c = best_y[0], best_y[1 + c], best_y[1 + m + c]
        v, r_o, n_o = master_eval(b, r_c, y_c, cfg.inner_grid, cfg.zoom_grid)
        if v > best_v:
            y2 = assemble(b, r_c, y_c, r_o, n_o, best_y)
            rep2 = solve_smooth(problem, [y2], scfg)
            if rep2.value > best_v:
                best_y, best_v = rep2.x_star, rep2.value
    ref_v = candidates[0][0]
    if ref_v > best_v:
        best_y, best_v = ref_y, ref_v
    strat = ctx.from_y(best_y)
    strat = TncStrategy(strat.b, strat.r, np.maximum(strat.n_idle, ctx.floor))
    dests = [DestinationStrategy(int(j), strat.b, strat.r.copy(), strat.n_idle.copy()) for j in c]
    return CellSolution(cell, dests, float(best_v), strat)


def tnc_profit_bounds(
    candidate: TncStrategy, transit, scenario, partition: Partition, config: TncSolverConfig | None = None
) -> ProfitBounds:
    """Upper bound from the cell relaxation, lower bound from the profit-weighted blend."""
    partition.validate(scenario.n_zones)
    ctx = TncContext(scenario, transit)
    sols = [solve_relaxed_cell(cell, transit, scenario, config, reference=candidate, ctx=ctx) for cell in partition.cells]
    values = np.array([s.value for s in sols])
    upper = float(values.sum())
    weights = np.clip(values, 0.0, None)
    if weights.sum() <= 0:
        weights = np.ones_like(values)
    weights = weights / weights.sum()
    vecs = np.array([s.strategy.as_vector() for s in sols])
    blend = TncStrategy.from_vector(weights @ vecs)
    # re-project onto the feasible box (wait cap may be active)
    blend = TncStrategy(
        float(np.clip(blend.b, 1e-6, scenario.b_max)),
        np.clip(blend.r, 1e-6, scenario.r_a_max),
        np.clip(blend.n_idle, ctx.floor, ctx.n_max),
    )
    lower = ctx.profit(blend)
    cand = ctx.profit(candidate)
    eps_abs = upper - cand
    eps_rel = eps_abs / abs(upper) if upper != 0 else float("inf")
    return ProfitBounds(upper, float(lower), float(cand), float(eps_abs), float(eps_rel), values.tolist(), blend)
