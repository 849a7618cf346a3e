"""Transit side: ridership and profit, the concavity certificate, and the fare/frequency best response.

With the platform strategy frozen, every transit-using mode (p, b1, b2, b3)
carries the same fare and transit-wait terms, so the transit share of an
OD/class is a logistic function

    P = expit(h - eps * (alpha * w^p + gamma * r^p * l^p))

where ``h`` collects everything else. All derivatives below use this form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from .choice import A, O, TRANSIT_MODES, add_tnc_terms, demand_tensor, partial_costs, transit_wait_time
from .errors import Infeasible
from .optim import SmoothProblem, SolverConfig, golden_max, solve_smooth
from .strategies import TransitStrategy

_NEG = -1e30


@dataclass(frozen=True)
class TransitSolverConfig:
    n_grid: int = 61
    refine: bool = True
    certify: bool = True
    certificate_grid: int = 31
    tol: float = 1e-9
    max_inner: int = 300
    hint_window: int = 3
    coarse_stride: int = 4


@dataclass(eq=False)
class ConcavityCertificate:
    n_bar: np.ndarray  # (M, M) max fixed point over the fare grid, 1/hours
    threshold: float  # 1 / w^p_max
    margins: np.ndarray  # threshold - n_bar
    holds: bool
    r_p_grid: np.ndarray

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())


class TransitContext:
    """Transit objective pieces with the platform strategy frozen."""

    def __init__(self, scenario, tnc, subsidy=None):
        net, beh = scenario.network, scenario.behavior
        m, n_lines = net.n_zones, net.n_lines
        self.scenario = scenario
        self.m = m
        dummy = TransitStrategy(0.0, np.ones(n_lines))
        c = add_tnc_terms(scenario, partial_costs(scenario, dummy, np.zeros((m, m)), self._subsidy(scenario, subsidy)), tnc)
        z = -beh.epsilon * c
        self.log_g1_base = logsumexp(z[..., list(TRANSIT_MODES)], axis=-1)
        self.log_g0_rest = logsumexp(z[..., [A, O]], axis=-1)
        self.h = self.log_g1_base - self.log_g0_rest
        alpha, _, gamma, _ = beh.weights()
        self.alpha, self.gamma, self.eps = alpha, gamma, beh.epsilon
        self.lam0 = scenario.demand0
        self.lp = net.transit_distance
        self.phi = net.phi
        self.phi_flat = net.phi.reshape(m * m, n_lines)
        self.line_cost = net.line_cost
        self.f_min, self.f_max = net.f_bounds
        self.used = np.any(self.phi_flat > 0, axis=0)
        rows = np.unique(self.phi_flat[:, self.used], axis=0)
        self.wait_rows = rows
        self.w_max = scenario.w_p_max
        self.r_max = scenario.r_p_max
        self.pi_0 = scenario.pi_0

    @staticmethod
    def _subsidy(scenario, subsidy):
        return scenario.policy.subsidy if subsidy is None else subsidy

    # -- frequency form ---------------------------------------------------

    def waits(self, f):
        if np.any(f[self.used] <= 0):
            return transit_wait_time(self.phi, f)  # raises
        return (self.phi_flat @ (1.0 / f)).reshape(self.m, self.m)

    def shares_at_wait(self, r_p, w_p):
        x = self.h - self.eps * (self.alpha * w_p[..., None] + self.gamma * r_p * self.lp[..., None])
        return expit(x)

    def evaluate(self, r_p, f, want_grad=False):
        """Ridership, profit and (optionally) their gradients in ``f``."""
        f = np.asarray(f, dtype=float)
        w = self.waits(f)
        p = self.shares_at_wait(r_p, w)
        riders = np.sum(self.lam0 * p, axis=-1)
        ridership = float(riders.sum())
        profit = float(r_p * np.sum(self.lp * riders) - f @ self.line_cost)
        if not want_grad:
            return ridership, profit
        slope = -self.eps * np.sum(self.lam0 * self.alpha * p * (1.0 - p), axis=-1)  # d riders / d w
        inv_f2 = 1.0 / f**2
        g_r = -(self.phi_flat.T @ slope.ravel()) * inv_f2
        g_pi = -(self.phi_flat.T @ (r_p * self.lp * slope).ravel()) * inv_f2 - self.line_cost
        return ridership, profit, g_r, g_pi

    # -- idle-vehicle-equivalent form (w^p = 1 / N^p) ----------------------

    def ridership_np(self, r_p, n_p):
        p = self.shares_at_wait(r_p, 1.0 / np.asarray(n_p, dtype=float))
        return float(np.sum(self.lam0 * p))

    def g_functions(self, r_p, n_p):
        """Transit and total logit numerators (g1, g0) per OD/class at ``N^p``.

        A common shift that does not depend on ``N^p`` is removed, so ratios
        and derivatives with respect to ``N^p`` are exact.
        """
        n_p = np.asarray(n_p, dtype=float)
        shift = np.maximum(self.log_g1_base, self.log_g0_rest)
        log_g1 = self.log_g1_base - self.eps * (self.alpha / n_p[..., None] + self.gamma * r_p * self.lp[..., None])
        g1 = np.exp(log_g1 - shift)
        g0 = g1 + np.exp(self.log_g0_rest - shift)
        return g0, g1

    def dg1_dn(self, r_p, n_p):
        _, g1 = self.g_functions(r_p, n_p)
        n_p = np.asarray(n_p, dtype=float)[..., None]
        return self.eps * self.alpha / n_p**2 * g1

    def ridership_gradient_np(self, r_p, n_p):
        """Closed-form dR/dN^p_ij = sum_k lam0 (g0 - g1) / g0^2 * dg1/dN."""
        g0, g1 = self.g_functions(r_p, n_p)
        dg1 = self.dg1_dn(r_p, n_p)
        return np.sum(self.lam0 * (g0 - g1) / g0**2 * dg1, axis=-1)

    def ridership_hessian_diag_np(self, r_p, n_p):
        """Closed-form d2R/dN^p_ij^2 = sum_k lam0 (g0 - g1) / g0^3 [g1'' g0 - 2 g1'^2]."""
        n3 = np.asarray(n_p, dtype=float)[..., None]
        g0, g1 = self.g_functions(r_p, n_p)
        a = self.eps * self.alpha
        dg1 = a / n3**2 * g1
        d2g1 = g1 * (a**2 / n3**4 - 2.0 * a / n3**3)
        return np.sum(self.lam0 * (g0 - g1) / g0**3 * (d2g1 * g0 - 2.0 * dg1**2), axis=-1)

    # -- concavity machinery ----------------------------------------------

    def concavity_rhs(self, r_p, n_p):
        """(eps/2) sum a^2 lam0 P(1-P)(1-2P) / sum a lam0 P(1-P), evaluated in log space.

        ``n_p`` broadcasts against (M, M); extra trailing axes are allowed
        when ``n_p`` has shape (M, M, S) (a scan per OD).
        """
        n_p = np.asarray(n_p, dtype=float)
        scan = n_p.ndim == 3
        n4 = n_p[..., None] if not scan else n_p[..., None]
        h = self.h[..., None, :] if scan else self.h
        lp = self.lp[..., None, None] if scan else self.lp[..., None]
        lam0 = self.lam0[..., None, :] if scan else self.lam0
        x = h - self.eps * (self.alpha / n4 + self.gamma * r_p * lp)
        # log P(1-P) = log_expit(x) + log_expit(-x)
        logq = log_expit(x) + log_expit(-x) + np.log(np.maximum(lam0, 1e-300)) + np.log(self.alpha)
        logq = np.where(lam0 > 0, logq, -np.inf)
        top = np.max(logq, axis=-1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        q = np.exp(logq - top)
        one_minus_2p = -np.tanh(x / 2.0)  # 1 - 2 expit(x)
        num = np.sum(self.alpha * q * one_minus_2p, axis=-1)
        den = np.sum(q, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 0.5 * self.eps * num / den
        return np.where(den > 0, out, 0.0)

    def rhs_limit_zero(self):
        """Zero-wait-capacity limit of the concavity RHS as stated in closed form."""
        a = self.alpha
        return 0.5 * self.eps * np.sum(a**2 * self.lam0, axis=-1) / np.sum(a * self.lam0, axis=-1)

    def n_hat(self, r_p, n_cap=None, n_scan=400, n_lo=1e-6):
        n_cap = n_cap if n_cap is not None else 10.0 / self.w_max
        return largest_fixed_point(lambda n: self.concavity_rhs(r_p, n), n_cap, n_scan, n_lo, shape=(self.m, self.m))

    # -- inner transit problem at a fixed fare -----------------------------

    def wait_constraint(self, f_used):
        return self.w_max - self.wait_rows @ (1.0 / f_used)

    def wait_constraint_jac(self, f_used):
        return self.wait_rows / f_used**2

    def full_f(self, f_used):
        f = self.f_min.copy()
        f[self.used] = f_used
        return f


def largest_fixed_point(rhs, n_cap, n_scan=400, n_lo=1e-6, shape=()):
    """Largest root of N = rhs(N) on (0, n_cap] for a batch of independent equations.

    ``rhs`` maps an array of trial values with trailing scan axis (``shape + (S,)``)
    to values of the same shape. The scan runs on a log grid from ``n_cap``
    downward; the first sign change is refined by bisection. Returns 0 where
    rhs(N) < N on the whole scan, and ``n_cap`` where rhs(n_cap) >= n_cap.
    """
    grid = np.geomspace(n_lo, n_cap, n_scan)
    trial = np.broadcast_to(grid, tuple(shape) + (n_scan,))
    F = rhs(trial) - trial
    nonneg = F >= 0
    any_nonneg = nonneg.any(axis=-1)
    # last index (largest N) with F >= 0
    last = n_scan - 1 - np.argmax(nonneg[..., ::-1], axis=-1)
    result = np.zeros(shape)
    at_cap = any_nonneg & (last == n_scan - 1)
    result = np.where(at_cap, n_cap, result)
    todo = any_nonneg & ~at_cap
    if np.any(todo):
        lo = grid[np.where(todo, last, 0)]
        hi = grid[np.where(todo, np.minimum(last + 1, n_scan - 1), 0)]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = rhs(mid[..., None])[..., 0] - mid
            pos = fm >= 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        result = np.where(todo, 0.5 * (lo + hi), result)
    return result


# ---------------------------------------------------------------- public API


def transit_ridership(transit: TransitStrategy, tnc, scenario) -> float:
    """Total hourly trips on transit-using modes (p, b1, b2, b3)."""
    return float(demand_tensor(scenario, tnc, transit).transit_riders.sum())


def transit_profit(transit: TransitStrategy, tnc, scenario) -> float:
    """Fare revenue over transit-using trips minus line operating cost."""
    riders = demand_tensor(scenario, tnc, transit).transit_riders.sum(axis=-1)
    revenue = transit.r_p * float(np.sum(scenario.network.transit_distance * riders))
    return revenue - float(transit.f @ scenario.network.line_cost)


def concavity_rhs(r_p, n_p, od, scenario, tnc) -> float:
    i, j = od
    return float(TransitContext(scenario, tnc).concavity_rhs(r_p, np.full((scenario.n_zones,) * 2, n_p))[i, j])


def solve_Nhat(r_p, od, scenario, tnc, n_scan: int = 400) -> float:
    i, j = od
    return float(TransitContext(scenario, tnc).n_hat(r_p, n_scan=n_scan)[i, j])


def certify_concavity(scenario, tnc, r_p_grid=None, ctx: TransitContext | None = None) -> ConcavityCertificate:
    ctx = ctx or TransitContext(scenario, tnc)
    if r_p_grid is None:
        r_p_grid = np.linspace(0.0, scenario.r_p_max, 31)
    r_p_grid = np.asarray(r_p_grid, dtype=float)
    n_bar = np.zeros((ctx.m, ctx.m))
    for r in r_p_grid:
        n_bar = np.maximum(n_bar, ctx.n_hat(r))
    threshold = 1.0 / scenario.w_p_max
    margins = threshold - n_bar
    return ConcavityCertificate(n_bar, threshold, margins, bool(np.all(margins >= 0)), r_p_grid)


def _inner_problem(ctx: TransitContext, r_p, objective: str):
    used = ctx.used
    lo, hi = ctx.f_min[used], ctx.f_max[used]

    memo = {}

    def ev(fu):
        key = fu.tobytes()
        if key not in memo:
            memo.clear()
            memo[key] = ctx.evaluate(r_p, ctx.full_f(fu), want_grad=True)
        return memo[key]

    if objective == "profit":
        f = lambda fu: ev(fu)[1]
        g = lambda fu: ev(fu)[3][used]
        cons, cgrads = (), None
    else:
        f = lambda fu: ev(fu)[0]
        g = lambda fu: ev(fu)[2][used]
        cons = (lambda fu: ev(fu)[1] - ctx.pi_0,)
        cgrads = (lambda fu: ev(fu)[3][used],)
    return SmoothProblem(
        f, lo, hi, constraints=cons, gradient=g, constraint_gradients=cgrads,
        constraint_scales=(max(1.0, abs(ctx.pi_0)),) if cons else None,
        vector_constraint=ctx.wait_constraint, vector_constraint_jac=ctx.wait_constraint_jac,
        vector_constraint_scale=ctx.w_max,
    )


def _phase_one(ctx, r_p, scfg):
    """Maximize profit under the wait caps, starting from the top frequencies."""
    return solve_smooth(_inner_problem(ctx, r_p, "profit"), ctx.f_max[ctx.used], scfg)


def solve_transit_inner(ctx: TransitContext, r_p: float, config: TransitSolverConfig | None = None):
    """Best frequencies at a fixed fare; returns (f, ridership, profit) or None if infeasible.

    Transit waits are pinned at their harmonic-mean bound (ridership and
    revenue both increase with N^p), leaving a problem in ``f`` only. Phase I
    maximizes profit under the wait caps to find a point meeting the profit
    floor; phase II maximizes ridership from there.
    """
    cfg = config or TransitSolverConfig()
    used = ctx.used
    f_top = ctx.full_f(ctx.f_max[used])
    if np.any(ctx.wait_constraint(f_top[used]) <= 0):
        return None
    ride_top, prof_top = ctx.evaluate(r_p, f_top)
    if prof_top >= ctx.pi_0:
        return f_top, ride_top, prof_top
    scfg = SolverConfig(tol=cfg.tol, max_inner=cfg.max_inner)
    rep1 = _phase_one(ctx, r_p, scfg)
    f1 = ctx.full_f(rep1.x_star)
    ride1, prof1 = ctx.evaluate(r_p, f1)
    if prof1 < ctx.pi_0:
        return None
    if prof1 - ctx.pi_0 <= 1e-9 * max(1.0, abs(ctx.pi_0)):
        return f1, ride1, prof1
    rep2 = solve_smooth(_inner_problem(ctx, r_p, "ridership"), rep1.x_star, scfg)
    f2 = ctx.full_f(rep2.x_star)
    ride2, prof2 = ctx.evaluate(r_p, f2)
    if prof2 < ctx.pi_0 - 1e-6 or ride2 < ride1:
        return f1, ride1, prof1
    return f2, ride2, prof2


def solve_transit_inner_joint(ctx: TransitContext, r_p: float, config: TransitSolverConfig | None = None):
    """Same inner problem in the joint (f, N^p) variables; intended for small networks.

    N^p_ij <= 1 / (phi_ij . 1/f) and the profit floor are barrier constraints,
    N^p_ij >= 1/w^p_max is a box bound. Returns (f, N^p, ridership) or None.
    """
    cfg = config or TransitSolverConfig()
    used = ctx.used
    if np.any(ctx.wait_constraint(ctx.f_max[used]) <= 0):
        return None
    # start from the profit-maximizing frequencies, where the floor is slack
    rep1 = _phase_one(ctx, r_p, SolverConfig(tol=cfg.tol, max_inner=cfg.max_inner))
    if ctx.evaluate(r_p, ctx.full_f(rep1.x_star))[1] <= ctx.pi_0:
        return None
    start = (ctx.full_f(rep1.x_star),)
    m2 = ctx.m * ctx.m
    used = ctx.used
    nu = int(used.sum())
    f_start = start[0][used]
    w_start = ctx.waits(start[0]).ravel()
    n_start = 0.999 / w_start
    n_floor = 1.0 / ctx.w_max
    n_start = np.where(n_start > n_floor, n_start, 0.5 * (n_floor + 1.0 / w_start))
    w_floor = ctx.waits(ctx.full_f(ctx.f_max[used])).ravel()
    lo = np.concatenate((ctx.f_min[used], np.full(m2, 1.0 / ctx.w_max)))
    hi = np.concatenate((ctx.f_max[used], 1.0 / w_floor))
    phi_u = ctx.phi_flat[:, used]

    def split(x):
        return x[:nu], x[nu:]

    def riders(n):
        p = ctx.shares_at_wait(r_p, 1.0 / n.reshape(ctx.m, ctx.m))
        return np.sum(ctx.lam0 * p, axis=-1)

    def obj(x):
        return float(riders(split(x)[1]).sum())

    def grad(x):
        g = np.zeros_like(x)
        g[nu:] = ctx.ridership_gradient_np(r_p, split(x)[1].reshape(ctx.m, ctx.m)).ravel()
        return g

    def profit_gap(x):
        fu, n = split(x)
        return r_p * float(np.sum(ctx.lp * riders(n))) - ctx.full_f(fu) @ ctx.line_cost - ctx.pi_0

    def profit_grad(x):
        fu, n = split(x)
        g = np.zeros_like(x)
        g[:nu] = -ctx.line_cost[used]
        g[nu:] = r_p * (ctx.lp.ravel() * ctx.ridership_gradient_np(r_p, n.reshape(ctx.m, ctx.m)).ravel())
        return g

    def harmonic(x):
        fu, n = split(x)
        return 1.0 - n * (phi_u @ (1.0 / fu))

    def harmonic_jac(x):
        fu, n = split(x)
        J = np.zeros((m2, x.size))
        J[:, :nu] = n[:, None] * phi_u / fu**2
        J[np.arange(m2), nu + np.arange(m2)] = -(phi_u @ (1.0 / fu))
        return J

    x0 = np.clip(np.concatenate((f_start, n_start)), lo, hi)
    if profit_gap(x0) <= 0:
        return None
    cons = (profit_gap,)
    problem = SmoothProblem(
        obj, lo, hi, constraints=cons, gradient=grad, constraint_gradients=(profit_grad,),
        constraint_scales=(max(1.0, abs(ctx.pi_0)),),
        vector_constraint=harmonic, vector_constraint_jac=harmonic_jac,
    )
    rep = solve_smooth(problem, x0, SolverConfig(tol=cfg.tol, max_inner=cfg.max_inner))
    fu, n = split(rep.x_star)
    return ctx.full_f(fu), n.reshape(ctx.m, ctx.m), rep.value


def _scan_grid(ctx, grid, cfg):
    """Inner solves on a fare grid, coarse-to-fine.

    Every ``coarse_stride``-th point is solved first; the full-resolution
    neighbourhood (stride - 1 points each side) of the two best coarse points
    is then filled in. Unsolved points are reported as None.
    """
    n = grid.size
    results = [None] * n
    done = np.zeros(n, dtype=bool)

    def solve(idx):
        for i in idx:
            if not done[i]:
                results[i] = solve_transit_inner(ctx, float(grid[i]), cfg)
                done[i] = True

    stride = max(1, int(cfg.coarse_stride))
    coarse = list(range(0, n, stride))
    if coarse[-1] != n - 1:
        coarse.append(n - 1)
    solve(coarse)
    vals = np.array([results[i][1] if results[i] is not None else -np.inf for i in coarse])
    if stride > 1 and np.any(np.isfinite(vals)):
        order = np.argsort(-vals, kind="stable")[:2]
        for o in order:
            if np.isfinite(vals[o]):
                c = coarse[o]
                solve(range(max(0, c - stride + 1), min(n, c + stride)))
    return results


def solve_transit_best_response(
    tnc, scenario, config: TransitSolverConfig | None = None, return_details=False, r_p_hint=None
):
    """Fare grid (plus local refinement) over inner frequency solves.

    Returns ``(TransitStrategy, ridership, global_flag)``; the flag is the
    concavity certificate (inner problems provably concave) when
    ``config.certify`` is set, else None. With ``r_p_hint`` only a window of
    ``config.hint_window`` grid steps on each side of the hint is scanned
    (used for warm-started iterations).
    """
    cfg = config or TransitSolverConfig()
    ctx = TransitContext(scenario, tnc)
    grid = np.linspace(0.0, scenario.r_p_max, cfg.n_grid)
    if r_p_hint is not None and cfg.n_grid > 1:
        step = grid[1] - grid[0]
        offsets = step * np.arange(-cfg.hint_window, cfg.hint_window + 1)
        grid = np.unique(np.clip(float(r_p_hint) + offsets, 0.0, scenario.r_p_max))
    results = _scan_grid(ctx, grid, cfg)
    values = np.array([res[1] if res is not None else -np.inf for res in results])
    if r_p_hint is not None:
        # a window maximum on an interior edge (or none at all) says nothing about the rest of the range
        k = int(np.argmax(values))
        edge = (k == 0 and grid[0] > 0.0) or (k == grid.size - 1 and grid[-1] < scenario.r_p_max)
        if not np.any(np.isfinite(values)) or edge:
            return solve_transit_best_response(tnc, scenario, cfg, return_details)
    if not np.any(np.isfinite(values)):
        raise Infeasible(f"no fare on [0, {scenario.r_p_max}] meets the profit floor {scenario.pi_0}")
    k = int(np.argmax(values))
    best_r, best = float(grid[k]), results[k]
    if cfg.refine and grid.size > 1:
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        cache = {}

        def value(r):
            res = solve_transit_inner(ctx, float(r), cfg)
            cache[float(r)] = res
            return res[1] if res is not None else _NEG

        r_ref, v_ref = golden_max(value, float(a), float(b), xtol=1e-6)
        if v_ref > best[1] and cache.get(float(r_ref)) is not None:
            best_r, best = float(r_ref), cache[float(r_ref)]
    strategy = TransitStrategy(best_r, best[0])
    flag = None
    cert = None
    if cfg.certify:
        cert = certify_concavity(scenario, tnc, np.linspace(0.0, scenario.r_p_max, cfg.certificate_grid), ctx)
        flag = cert.holds
    if return_details:
        return strategy, best[1], flag, cert
    return strategy, best[1], flag
