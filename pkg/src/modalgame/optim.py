"""Numerical kernels: barrier-based smooth maximization, grid search, finite differences.

Everything here maximizes. The inner quasi-Newton step is scipy's L-BFGS-B
(projected on the box); inequality constraints ``g(x) >= 0`` enter through a
log barrier whose weight is driven to zero. Below ``t = mu`` the log is
continued by its quadratic Taylor expansion so line searches never see inf.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import EmptyGrid, InfeasibleStart, NotConverged


@dataclass
class SmoothProblem:
    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    constraints: Sequence[Callable[[np.ndarray], float]] = ()
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    constraint_gradients: Sequence[Callable[[np.ndarray], np.ndarray]] | None = None
    constraint_scales: Sequence[float] | None = None
    # optional vectorized block g(x) >= 0 (elementwise) with its Jacobian
    vector_constraint: Callable[[np.ndarray], np.ndarray] | None = None
    vector_constraint_jac: Callable[[np.ndarray], np.ndarray] | None = None
    vector_constraint_scale: float | np.ndarray = 1.0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("need lower <= upper with matching shapes")

    @property
    def dimension(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class SolverConfig:
    mu_start: float = 1.0
    mu_min: float = 1e-8
    mu_factor: float = 10.0
    tol: float = 1e-8  # projected-gradient tolerance in scaled variables
    max_inner: int = 400
    x_scale: np.ndarray | None = None
    f_scale: float | None = None
    ftol: float = 1e-15
    raise_on_failure: bool = False


@dataclass
class SolveReport:
    x_star: np.ndarray
    value: float
    iterations: int
    converged: bool
    constraint_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    outer_values: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.constraint_residuals >= -1e-8))


def finite_diff_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for n in range(x.size):
        e = np.zeros_like(x)
        e[n] = h
        g[n] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def _projected_grad_norm(x, g, lo, hi):
    pg = g.copy()
    pg[(x <= lo) & (g < 0)] = 0.0
    pg[(x >= hi) & (g > 0)] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def _constraint_block(problem: SmoothProblem, h: float):
    """Stack scalar and vector constraints into one g(x), J(x) pair (unscaled)."""
    cons = list(problem.constraints)
    cgrads = problem.constraint_gradients or [(lambda x, g=g: finite_diff_gradient(g, x, h)) for g in cons]
    vec, vjac = problem.vector_constraint, problem.vector_constraint_jac
    if vec is not None and vjac is None:
        def vjac(x):
            cols = [(vec(x + e) - vec(x - e)) / (2 * h) for e in np.eye(x.size) * h]
            return np.stack(cols, axis=1)

    def g(x):
        parts = [np.array([c(x) for c in cons], dtype=float)]
        if vec is not None:
            parts.append(np.asarray(vec(x), dtype=float).ravel())
        return np.concatenate(parts)

    def jac(x):
        rows = [np.array([cg(x) for cg in cgrads], dtype=float).reshape(len(cons), x.size)]
        if vec is not None:
            rows.append(np.asarray(vjac(x), dtype=float).reshape(-1, x.size))
        return np.concatenate(rows, axis=0)

    return g, jac, len(cons) > 0 or vec is not None


def _solve_one(problem: SmoothProblem, x0, cfg: SolverConfig) -> SolveReport:
    lo, hi = problem.lower, problem.upper
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != lo.shape or np.any(x0 < lo) or np.any(x0 > hi):
        raise InfeasibleStart("start lies outside the box")

    width = hi - lo
    scale = cfg.x_scale if cfg.x_scale is not None else np.where(
        np.isfinite(width) & (width > 0), width, np.maximum(1.0, np.abs(x0))
    )
    scale = np.asarray(scale, dtype=float)
    h = 1e-7 * float(np.max(scale))
    gfun, gjac, has_cons = _constraint_block(problem, h)
    g0 = gfun(x0)
    if has_cons and not np.all(g0 > 0):
        raise InfeasibleStart(f"start violates constraints (min residual {g0.min():.3g})")
    f0 = problem.objective(x0)
    fs = cfg.f_scale if cfg.f_scale is not None else max(1.0, abs(f0))
    n_scalar = len(problem.constraints)
    cs = np.ones_like(g0)
    if problem.constraint_scales is not None:
        cs[:n_scalar] = problem.constraint_scales
    else:
        cs[:n_scalar] = np.maximum(1.0, np.abs(g0[:n_scalar]))
    cs[n_scalar:] = problem.vector_constraint_scale
    grad = problem.gradient or (lambda x: finite_diff_gradient(problem.objective, x, h))
    bounds = list(zip(lo / scale, hi / scale))

    inv_cs = 1.0 / cs

    def make_fun(mu):
        log_mu = np.log(mu) if mu > 0 else 0.0

        def fun(u):
            x = np.clip(u * scale, lo, hi)
            val = problem.objective(x) / fs
            dval = grad(x) * (scale / fs)
            if has_cons:
                t = gfun(x) * inv_cs
                if t.min() >= mu:
                    val += mu * np.log(t).sum()
                    dl = 1.0 / t
                else:
                    ok = t >= mu
                    z = (t - mu) / mu
                    val += mu * np.where(ok, np.log(np.maximum(t, mu)), log_mu + z - 0.5 * z * z).sum()
                    dl = np.where(ok, 1.0 / np.maximum(t, mu), (1.0 - z) / mu)
                dval = dval + mu * ((dl * inv_cs) @ gjac(x)) * scale
            return -val, -dval

        return fun

    u = x0 / scale
    iterations = 0
    outer = []
    ok = True
    mus = [0.0] if not has_cons else []
    mu = cfg.mu_start
    while has_cons and mu >= cfg.mu_min * (1 - 1e-12):
        mus.append(mu)
        mu /= cfg.mu_factor
    best_x, best_val = x0, f0
    for mu in mus:
        fun = make_fun(mu)
        res = minimize(
            fun, u, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": cfg.max_inner, "gtol": cfg.tol, "ftol": cfg.ftol, "maxcor": 20},
        )
        iterations += int(res.nit)
        u = res.x
        x = np.clip(u * scale, lo, hi)
        val = problem.objective(x)
        resid = gfun(x)
        # keep the best feasible iterate so the outer sequence never decreases
        if np.all(resid >= -1e-8 * cs) and val >= best_val:
            best_x, best_val = x, val
        outer.append(best_val)
        if mu == mus[-1]:
            _, dval = fun(u)
            ok = bool(res.success) or _projected_grad_norm(u, -dval, lo / scale, hi / scale) <= max(cfg.tol, 1e-6)
    resid = gfun(best_x)
    return SolveReport(best_x, float(best_val), iterations, bool(ok), resid, outer)


def solve_smooth(problem: SmoothProblem, x0, config: SolverConfig | None = None) -> SolveReport:
    """Maximize ``problem.objective`` from one start or a list of starts.

    The best feasible result over all starts is returned (earliest start wins
    ties). With ``raise_on_failure`` a non-converged best result raises
    :class:`NotConverged`.
    """
    cfg = config or SolverConfig()
    starts = [x0] if np.ndim(x0) == 1 else list(x0)
    best = None
    for s in starts:
        rep = _solve_one(problem, s, cfg)
        if best is None or (rep.feasible, rep.value) > (best.feasible, best.value):
            best = rep
    if cfg.raise_on_failure and not best.converged:
        raise NotConverged(f"best start did not converge (value {best.value})")
    return best


def grid_search(objective, grid_spec, vectorized: bool = False):
    """Exhaustive argmax over the Cartesian product of 1-D axes.

    Axes are sorted ascending, so the first maximizer in product order is the
    lexicographically smallest one. With ``vectorized=True`` the objective
    receives one array per axis (meshgrid, ij indexing) and returns an array.
    """
    axes = [np.sort(np.atleast_1d(np.asarray(a, dtype=float))) for a in grid_spec]
    if not axes or any(a.size == 0 for a in axes):
        raise EmptyGrid("every grid axis needs at least one point")
    if vectorized:
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(objective(*mesh), dtype=float)
        flat = np.where(np.isnan(vals), -np.inf, vals).ravel()
        n = int(np.argmax(flat))
        idx = np.unravel_index(n, vals.shape)
        return np.array([a[i] for a, i in zip(axes, idx)]), float(flat[n])
    best_x, best_v = None, -np.inf
    for point in itertools.product(*axes):
        v = objective(np.array(point))
        if best_x is None or v > best_v:
            best_x, best_v = np.array(point), v
    return best_x, float(best_v)


def golden_max(f, a: float, b: float, xtol: float = 1e-6) -> tuple[float, float]:
    """Bounded 1-D maximization (Brent/golden hybrid from scipy); endpoints also checked."""
    if b <= a:
        return a, f(a)
    res = minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded", options={"xatol": xtol})
    cands = [(float(-res.fun), float(res.x)), (f(a), a), (f(b), b)]
    v, x = max(cands, key=lambda t: t[0])
    return x, v
