"""Scenario bundle, JSON persistence and small synthetic instances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .choice import BehaviorParams, IncomeClassParams
from .errors import ParseError, SchemaVersionError, ValidationError
from .network import MultimodalNetwork, TransitLine, Zone, build_network
from .strategies import PolicyConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Scenario:
    network: MultimodalNetwork
    behavior: BehaviorParams
    demand0: np.ndarray  # (M, M, K) potential trips/hour
    c_av: float  # $/vehicle-hour
    r_p_max: float  # $/mile
    w_p_max: float  # hours
    pi_0: float  # $/hour
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    name: str = "scenario"
    # box limits for operator decisions
    b_max: float = 60.0
    r_a_max: float = 20.0
    n_idle_max: float = 5000.0
    # free-form provenance (generator, seed, calibration constants); not used by solvers
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "demand0", np.asarray(self.demand0, dtype=float))
        m = self.network.n_zones
        k = self.behavior.n_classes
        if self.demand0.shape != (m, m, k):
            raise ValidationError(f"expected shape {(m, m, k)}, got {self.demand0.shape}", "demand0_trips_per_hour")
        if np.any(self.demand0 < 0):
            raise ValidationError("must be nonnegative", "demand0_trips_per_hour")
        if self.behavior.outside_cost.shape != (m, m, k):
            raise ValidationError(f"expected shape {(m, m, k)}", "behavior.outside_cost")
        if not self.c_av >= 0:
            raise ValidationError("must be nonnegative", "C_av (c_av_per_hour)")
        if not self.w_p_max > 0:
            raise ValidationError("must be positive", "w_p_max_hours")
        if not self.r_p_max >= 0:
            raise ValidationError("must be nonnegative", "r_p_max_per_mile")
        for z in self.network.zones:
            if len(z.population_split) != k:
                raise ValidationError(f"needs {k} entries", f"zones[{z.id}].population_split")

    @property
    def n_zones(self) -> int:
        return self.network.n_zones

    @property
    def n_classes(self) -> int:
        return self.behavior.n_classes

    def with_updates(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_policy(self, **changes) -> "Scenario":
        return replace(self, policy=replace(self.policy, **changes))


def scenario_to_dict(s: Scenario) -> dict:
    net, beh = s.network, s.behavior
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "zones": [
            {
                "id": z.id,
                "area_sq_miles": z.area,
                "matching_scale_hours_sqrt_veh": z.matching_scale,
                "firstmile_scale_miles_sqrt_stations": z.firstmile_scale,
                "station_count": z.station_count,
                "is_underserved": z.is_underserved,
                "population_split": list(z.population_split),
            }
            for z in net.zones
        ],
        "lines": [
            {
                "id": ln.id,
                "name": ln.name,
                "stations": list(ln.stations),
                "op_cost_per_vehicle_hour": ln.op_cost,
                "f_min_per_hour": ln.f_min,
                "f_max_per_hour": ln.f_max,
            }
            for ln in net.lines
        ],
        "road_distance_miles": net.road_distance.tolist(),
        "transit_distance_miles": net.transit_distance.tolist(),
        "behavior": {
            "epsilon_per_dollar": beh.epsilon,
            "v_a_mph": beh.v_a,
            "v_p_mph": beh.v_p,
            "v_w_mph": beh.v_w,
            "classes": [
                {"alpha_per_hour": c.alpha, "beta_per_hour": c.beta, "gamma": c.gamma, "theta_per_hour": c.theta}
                for c in beh.classes
            ],
            "outside_cost": beh.outside_cost.tolist(),
        },
        "demand0_trips_per_hour": s.demand0.tolist(),
        "c_av_per_hour": s.c_av,
        "r_p_max_per_mile": s.r_p_max,
        "w_p_max_hours": s.w_p_max,
        "pi_0_per_hour": s.pi_0,
        "policy": {"w_a_max_hours": s.policy.w_a_max, "subsidy_per_leg": s.policy.subsidy},
        "limits": {"b_max": s.b_max, "r_a_max_per_mile": s.r_a_max, "n_idle_max": s.n_idle_max},
        "metadata": s.metadata,
    }


def _get(d, key, path):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise ValidationError("missing field", f"{path}{key}") from None


def scenario_from_dict(d: dict) -> Scenario:
    version = d.get("schema_version") if isinstance(d, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    zones = [
        Zone(
            id=int(_get(z, "id", f"zones[{n}].")),
            area=float(_get(z, "area_sq_miles", f"zones[{n}].")),
            matching_scale=float(_get(z, "matching_scale_hours_sqrt_veh", f"zones[{n}].")),
            firstmile_scale=float(_get(z, "firstmile_scale_miles_sqrt_stations", f"zones[{n}].")),
            station_count=int(_get(z, "station_count", f"zones[{n}].")),
            is_underserved=bool(z.get("is_underserved", False)),
            population_split=tuple(float(x) for x in _get(z, "population_split", f"zones[{n}].")),
        )
        for n, z in enumerate(_get(d, "zones", ""))
    ]
    lines = [
        TransitLine(
            id=int(_get(ln, "id", f"lines[{n}].")),
            stations=tuple(int(x) for x in _get(ln, "stations", f"lines[{n}].")),
            op_cost=float(_get(ln, "op_cost_per_vehicle_hour", f"lines[{n}].")),
            f_min=float(ln.get("f_min_per_hour", 0.1)),
            f_max=float(ln.get("f_max_per_hour", 60.0)),
            name=str(ln.get("name", "")),
        )
        for n, ln in enumerate(_get(d, "lines", ""))
    ]
    network = build_network(zones, lines, _get(d, "road_distance_miles", ""), _get(d, "transit_distance_miles", ""))
    b = _get(d, "behavior", "")
    behavior = BehaviorParams(
        epsilon=float(_get(b, "epsilon_per_dollar", "behavior.")),
        v_a=float(_get(b, "v_a_mph", "behavior.")),
        v_p=float(_get(b, "v_p_mph", "behavior.")),
        v_w=float(_get(b, "v_w_mph", "behavior.")),
        classes=tuple(
            IncomeClassParams(
                float(_get(c, "alpha_per_hour", f"behavior.classes[{n}].")),
                float(_get(c, "beta_per_hour", f"behavior.classes[{n}].")),
                float(_get(c, "gamma", f"behavior.classes[{n}].")),
                float(_get(c, "theta_per_hour", f"behavior.classes[{n}].")),
            )
            for n, c in enumerate(_get(b, "classes", "behavior."))
        ),
        outside_cost=np.array(_get(b, "outside_cost", "behavior."), dtype=float),
    )
    pol = d.get("policy") or {}
    w_a_max = pol.get("w_a_max_hours")
    policy = PolicyConfig(
        w_a_max=None if w_a_max is None else float(w_a_max), subsidy=float(pol.get("subsidy_per_leg", 0.0))
    )
    limits = d.get("limits") or {}
    return Scenario(
        network=network,
        behavior=behavior,
        demand0=np.array(_get(d, "demand0_trips_per_hour", ""), dtype=float),
        c_av=float(_get(d, "c_av_per_hour", "")),
        r_p_max=float(_get(d, "r_p_max_per_mile", "")),
        w_p_max=float(_get(d, "w_p_max_hours", "")),
        pi_0=float(_get(d, "pi_0_per_hour", "")),
        policy=policy,
        name=str(d.get("name", "scenario")),
        b_max=float(limits.get("b_max", 60.0)),
        r_a_max=float(limits.get("r_a_max_per_mile", 20.0)),
        n_idle_max=float(limits.get("n_idle_max", 5000.0)),
        metadata=dict(d.get("metadata") or {}),
    )


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1, sort_keys=False) + "\n"


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s))


def two_zone_scenario(**overrides) -> Scenario:
    """Small single-class instance: two zones joined by one line."""
    zones = [
        Zone(1, area=1.0, matching_scale=0.3, firstmile_scale=1.609, station_count=4, is_underserved=False),
        Zone(2, area=1.0, matching_scale=0.3, firstmile_scale=1.609, station_count=4, is_underserved=True),
    ]
    lines = [TransitLine(1, (1, 2), op_cost=60.0, f_min=0.5, f_max=30.0, name="L1")]
    la = np.array([[0.8, 2.5], [2.5, 0.8]])
    lp = np.array([[0.0, 2.8], [2.8, 0.0]])
    network = build_network(zones, lines, la, lp)
    behavior = BehaviorParams(
        epsilon=0.3,
        v_a=17.937,
        v_p=14.349,
        v_w=3.48,
        classes=(IncomeClassParams(10.0, 5.0, 1.0, 12.0),),
        outside_cost=np.array([[[4.0], [9.0]], [[9.0], [4.0]]]),
    )
    params = dict(
        network=network,
        behavior=behavior,
        demand0=np.array([[[40.0], [120.0]], [[100.0], [30.0]]]),
        c_av=20.0,
        r_p_max=3.0,
        w_p_max=0.5,
        pi_0=-50.0,
        name="two-zone",
    )
    params.update(overrides)
    return Scenario(**params)


def random_scenario(seed: int, n_zones: int = 3, n_classes: int = 2, n_lines: int = 2) -> Scenario:
    """Randomized small instance used by property and sandwich checks."""
    rng = np.random.default_rng(seed)
    m, k = n_zones, n_classes
    areas = rng.uniform(0.6, 2.5, m)
    stations = rng.integers(2, 9, m)
    underserved = rng.random(m) < 0.4
    splits = rng.dirichlet(np.ones(k), m)
    zones = [
        Zone(
            n + 1,
            area=float(areas[n]),
            matching_scale=float(0.2 * areas[n]),
            firstmile_scale=float(1.609 * areas[n]),
            station_count=int(stations[n]),
            is_underserved=bool(underserved[n]),
            population_split=tuple(float(x) for x in splits[n] / splits[n].sum()),
        )
        for n in range(m)
    ]
    # a trunk line through every zone keeps all OD pairs reachable
    order = rng.permutation(m) + 1
    lines = [TransitLine(1, tuple(int(z) for z in order), op_cost=float(rng.uniform(40, 120)), f_min=0.5, f_max=30.0)]
    for lid in range(2, n_lines + 1):
        size = int(rng.integers(2, m + 1))
        stops = rng.choice(m, size=size, replace=False) + 1
        lines.append(
            TransitLine(lid, tuple(int(z) for z in stops), op_cost=float(rng.uniform(40, 120)), f_min=0.5, f_max=30.0)
        )
    xy = rng.uniform(0, 4, (m, 2))
    euclid = np.linalg.norm(xy[:, None] - xy[None, :], axis=-1)
    la = 1.3 * euclid + np.diag(0.6 * np.sqrt(areas))
    lp = 1.2 * la
    np.fill_diagonal(lp, 0.0)
    network = build_network(zones, lines, la, lp)
    alpha = np.sort(rng.uniform(4, 20, k))
    beta = alpha * rng.uniform(0.3, 0.6, k)
    gamma = np.sort(rng.uniform(0.7, 2.0, k))[::-1]
    theta = alpha * rng.uniform(1.0, 1.5, k)
    classes = tuple(IncomeClassParams(*map(float, v)) for v in zip(alpha, beta, gamma, theta))
    per_mile = rng.uniform(5.0, 8.0)
    outside = per_mile * la[:, :, None] * np.linspace(1.4, 1.0, k)[None, None, :] + 4.0
    behavior = BehaviorParams(0.25, 17.937, 14.349, 3.48, classes, outside)
    pop = rng.uniform(60, 300, m)
    trips = pop[:, None] * pop[None, :] / pop.sum() * np.exp(-euclid / 3.0)
    demand0 = trips[:, :, None] * splits[:, None, :]
    return Scenario(
        network, behavior, demand0, c_av=float(rng.uniform(10, 25)), r_p_max=3.0, w_p_max=1.0, pi_0=-200.0,
        name=f"random-{seed}",
    )
