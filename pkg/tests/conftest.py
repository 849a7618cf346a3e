import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from modalgame.choice import BehaviorParams, IncomeClassParams
from modalgame.network import TransitLine, Zone, build_network
from modalgame.scenario import Scenario, two_zone_scenario
from modalgame.sweep import SweepConfig, solve_point
from modalgame.synthetic import synthesize_sf_scenario

settings.register_profile(
    "modalgame", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("modalgame")


@pytest.fixture
def two_zone():
    return two_zone_scenario()


@pytest.fixture(scope="session")
def sf():
    return synthesize_sf_scenario(0)


@pytest.fixture(scope="session")
def sf_point(sf):
    """(record, candidate) for the SF scenario at C_av = 30 with pairwise bounds."""
    assert sf.c_av == 30.0
    return solve_point(sf, config=SweepConfig(partition="pairwise", expost=True), value=30.0)


def make_two_zone(
    demand=((40.0, 120.0), (100.0, 30.0)),
    n_lines=1,
    symmetric=False,
    classes=(IncomeClassParams(10.0, 5.0, 1.0, 12.0),),
    op_cost=60.0,
    pi_0=-50.0,
    w_p_max=0.5,
    second_cost=None,
    **overrides,
):
    """Two-zone instance with optional second line and K classes."""
    k = len(classes)
    zones = [
        Zone(1, 1.0, 0.3, 1.609, 4, False, tuple([1.0 / k] * k)),
        Zone(2, 1.0, 0.3, 1.609, 4, not symmetric, tuple([1.0 / k] * k)),
    ]
    lines = [TransitLine(1, (1, 2), op_cost=op_cost, f_min=0.5, f_max=30.0)]
    if n_lines == 2:
        cost2 = 1.5 * op_cost if second_cost is None else second_cost
        lines.append(TransitLine(2, (2, 1), op_cost=cost2, f_min=0.5, f_max=30.0))
    la = np.array([[0.8, 2.5], [2.5, 0.8]])
    lp = np.array([[0.0, 2.8], [2.8, 0.0]])
    net = build_network(zones, lines, la, lp)
    outside = np.array([[4.0, 9.0], [9.0, 4.0]])[:, :, None] * np.ones(k)
    beh = BehaviorParams(0.3, 17.937, 14.349, 3.48, tuple(classes), outside)
    d0 = np.asarray(demand, dtype=float)[:, :, None] * np.ones(k) / k
    params = dict(network=net, behavior=beh, demand0=d0, c_av=20.0, r_p_max=3.0, w_p_max=w_p_max, pi_0=pi_0)
    params.update(overrides)
    return Scenario(**params)


# one PASS/FAIL line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
