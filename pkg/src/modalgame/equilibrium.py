"""Alternating best responses and the ex-post epsilon-Nash evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .network import Partition
from .strategies import TncStrategy, TransitStrategy
from .tnc import TncSolverConfig, solve_tnc_best_response, tnc_profit_bounds, TncContext
from .transit import ConcavityCertificate, TransitContext, TransitSolverConfig, solve_transit_best_response


@dataclass
class IterationRecord:
    iteration: int
    delta_tnc: float
    delta_transit: float
    tnc_profit: float
    ridership: float
    base_fare: float
    transit_fare: float


@dataclass(eq=False)
class CandidateEquilibrium:
    tnc: TncStrategy
    transit: TransitStrategy
    iterations: int
    converged: bool
    trajectory: list[IterationRecord] = field(default_factory=list)
    sigma: float = 1e-3


@dataclass(eq=False)
class EpsilonReport:
    tnc_profit: float
    tnc_upper: float
    tnc_lower: float
    epsilon_abs: float
    epsilon_rel: float
    transit_ridership: float
    transit_global: bool | None
    certificate: ConcavityCertificate | None
    transit_resolve_ridership: float = float("nan")
    per_cell_values: list = field(default_factory=list)

    @property
    def transit_gap(self) -> float:
        """Ridership gained by re-solving the transit side at the candidate (0 at an exact best response)."""
        return self.transit_resolve_ridership - self.transit_ridership


def strategy_distance(a_tnc, b_tnc, a_tr=None, b_tr=None, idle_scale: float = 100.0):
    """Euclidean step sizes for both players; idle fleets are divided by ``idle_scale``."""
    d_a = float(np.linalg.norm(a_tnc.scaled_vector(idle_scale) - b_tnc.scaled_vector(idle_scale)))
    d_p = float(np.linalg.norm(a_tr.as_vector() - b_tr.as_vector())) if a_tr is not None else 0.0
    return d_a, d_p


def best_response_iterate(
    initial_tnc: TncStrategy,
    initial_transit: TransitStrategy,
    scenario,
    sigma: float = 1e-3,
    max_iter: int = 50,
    tnc_config: TncSolverConfig | None = None,
    transit_config: TransitSolverConfig | None = None,
    local_fare_search: bool = True,
) -> CandidateEquilibrium:
    """Alternate platform then transit best responses until both steps are within ``sigma``.

    Each best response is warm-started from the previous iterate. After the
    first round the transit fare scan is limited to a window around the
    previous fare when ``local_fare_search`` is set; the ex-post evaluation
    re-solves over the whole fare range.
    """
    tcfg = replace(transit_config or TransitSolverConfig(), certify=False)
    tnc, transit = initial_tnc, initial_transit
    trajectory = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        tnc_new = solve_tnc_best_response(transit, scenario, tnc_config, warm_start=tnc)
        hint = transit.r_p if (local_fare_search and it > 1) else None
        transit_new, ridership, _ = solve_transit_best_response(tnc_new, scenario, tcfg, r_p_hint=hint)
        d_a, d_p = strategy_distance(tnc_new, tnc, transit_new, transit)
        profit = TncContext(scenario, transit_new).profit(tnc_new)
        trajectory.append(IterationRecord(it, d_a, d_p, profit, ridership, tnc_new.b, transit_new.r_p))
        tnc, transit = tnc_new, transit_new
        if d_a <= sigma and d_p <= sigma:
            converged = True
            break
    return CandidateEquilibrium(tnc, transit, it if max_iter > 0 else 0, converged, trajectory, sigma)


def expost_evaluate(
    candidate: CandidateEquilibrium,
    scenario,
    partition: Partition,
    tnc_config: TncSolverConfig | None = None,
    transit_config: TransitSolverConfig | None = None,
) -> EpsilonReport:
    """Profit bounds with transit fixed, and a certified transit re-solve with the platform fixed."""
    bounds = tnc_profit_bounds(candidate.tnc, candidate.transit, scenario, partition, tnc_config)
    tcfg = replace(transit_config or TransitSolverConfig(), certify=True)
    _, resolved, flag, cert = solve_transit_best_response(candidate.tnc, scenario, tcfg, return_details=True)
    ridership = TransitContext(scenario, candidate.tnc).evaluate(candidate.transit.r_p, candidate.transit.f)[0]
    return EpsilonReport(
        tnc_profit=bounds.candidate_profit,
        tnc_upper=bounds.upper,
        tnc_lower=bounds.lower,
        epsilon_abs=bounds.epsilon_abs,
        epsilon_rel=bounds.epsilon_rel,
        transit_ridership=float(ridership),
        transit_global=flag,
        certificate=cert,
        transit_resolve_ridership=float(resolved),
        per_cell_values=bounds.per_cell_values,
    )


def default_initial_strategies(scenario, variant: int = 0) -> tuple[TncStrategy, TransitStrategy]:
    """Deterministic initial guesses; ``variant`` picks one of several spread-out guesses."""
    m = scenario.n_zones
    f_lo, f_hi = scenario.network.f_bounds
    presets = [
        (5.0, 2.0, 20.0, 0.5, 0.5),
        (12.0, 4.0, 80.0, 1.5, 0.8),
        (2.0, 1.0, 5.0, 0.2, 0.3),
        (8.0, 6.0, 200.0, 2.5, 0.95),
    ]
    b, r, n, rp, ff = presets[variant % len(presets)]
    floor = scenario.policy.idle_floor(scenario.network.matching_scale)
    tnc = TncStrategy(b, np.full(m, r), np.maximum(np.full(m, n), floor))
    f = f_lo + ff * (f_hi - f_lo)
    return tnc, TransitStrategy(min(rp, scenario.r_p_max), f)
