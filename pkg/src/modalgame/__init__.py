"""Equilibria of an autonomous ride-hailing platform competing with a transit agency.

The platform maximizes profit over fares and idle fleets, the agency maximizes
ridership over its fare and line frequencies, and passengers of several income
classes split across six modes by multinomial logit.
"""

from .choice import (
    MODES,
    BehaviorParams,
    DemandTensor,
    IncomeClassParams,
    amod_wait_time,
    cost_tensor,
    demand_tensor,
    fleet_hours,
    generalized_costs,
    logit_split,
    transit_wait_time,
)
from .equilibrium import (
    CandidateEquilibrium,
    EpsilonReport,
    best_response_iterate,
    default_initial_strategies,
    expost_evaluate,
)
from .equity import (
    AccessibilityTensor,
    TheilReport,
    accessibility,
    aggregate_accessibility,
    equity_report,
    scenario_shift,
    theil_decompose,
)
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .network import MultimodalNetwork, Partition, TransitLine, Zone, build_network, partition_zones
from .optim import SmoothProblem, SolverConfig, SolveReport, golden_max, grid_search, solve_smooth
from .scenario import Scenario, load_scenario, random_scenario, save_scenario, two_zone_scenario
from .strategies import PolicyConfig, TncStrategy, TransitStrategy
from .sweep import SweepConfig, SweepResults, export_results, load_results, run_sweep
from .synthetic import SyntheticConfig, synthesize_sf_scenario
from .tnc import solve_relaxed_cell, solve_tnc_best_response, tnc_profit, tnc_profit_bounds
from .transit import (
    certify_concavity,
    concavity_rhs,
    solve_Nhat,
    solve_transit_best_response,
    transit_profit,
    transit_ridership,
)

__version__ = "0.1.0"


def shipped_scenario_path(name: str = "two_zone.json"):
    """Path of a scenario file bundled with the package."""
    from importlib.resources import files

    return files(__package__) / "data" / name
