"""Synthetic San Francisco stand-in: 18 zones, 8 Muni-like lines, three income classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choice import BehaviorParams, IncomeClassParams
from .errors import ConfigError, ValidationError
from .network import TransitLine, Zone, build_network
from .scenario import Scenario

# centroid x, y (miles) and area (sq miles) for the 18 analysis zones
SF_ZONES = (
    (5.6, 5.3, 1.2), (4.9, 4.4, 1.4), (4.5, 5.7, 1.2), (3.5, 5.4, 2.3), (2.3, 4.9, 1.9), (5.1, 6.2, 0.9),
    (0.9, 5.0, 2.1), (4.6, 4.9, 0.7), (3.1, 4.2, 1.2), (1.7, 3.6, 2.3), (3.6, 3.4, 1.2), (5.6, 3.9, 2.5),
    (4.4, 3.0, 2.5), (3.0, 2.6, 2.5), (1.2, 2.6, 2.3), (5.4, 2.0, 4.8), (1.3, 1.3, 3.0), (3.5, 1.3, 3.4),
)
SF_UNDERSERVED = (5, 7, 9, 10, 11, 14, 15, 16, 17, 18)
SF_LINES = (
    ("F", (11, 8, 2, 1, 6)),
    ("J", (18, 14, 11, 8, 2, 1)),
    ("KT", (17, 14, 11, 8, 2, 1, 12, 16)),
    ("M", (17, 15, 14, 11, 8, 2, 1)),
    ("N", (10, 9, 8, 2, 1, 12)),
    ("5R", (7, 5, 9, 8, 2, 1)),
    ("9R", (16, 13, 2, 8, 1)),
    ("38R", (7, 5, 4, 8, 3, 1)),
)

SF_CLASSES = (
    IncomeClassParams(alpha=0.5, beta=0.15, gamma=3.0, theta=0.5),
    IncomeClassParams(alpha=1.0, beta=0.30, gamma=1.5, theta=1.0),
    IncomeClassParams(alpha=2.0, beta=0.65, gamma=0.75, theta=2.0),
)
# A_i = 7.894 * area reads in minutes (hours would give hour-long pickups); stored in hours
MATCHING_PER_AREA = 7.894
FIRSTMILE_PER_AREA = 1.609
REMOTE_SPLIT = (0.4, 0.5, 0.1)
CORE_SPLIT = (0.2, 0.5, 0.3)
# outside-option cost per mile relative to the high-income class
OUTSIDE_CLASS_RATIO = (1.5, 1.25, 1.0)


@dataclass(frozen=True)
class SyntheticConfig:
    zones: tuple = SF_ZONES
    underserved: tuple = SF_UNDERSERVED
    lines: tuple = SF_LINES
    core_stations: int = 16
    remote_stations: int = 6
    tnc_trips_per_hour: float = 10000.0
    amod_share: float = 0.15
    core_trip_weight: float = 2.5
    gravity_length: float = 3.0
    trip_noise: float = 0.25
    circuity: float = 1.3
    transit_detour: float = 1.15
    outside_per_mile: float = 3.0  # high-income class, core origins
    remote_premium: float = 0.5
    bus_cost_per_vehicle_hour: float = 500.0
    f_min: float = 0.1
    f_max: float = 60.0
    c_av: float = 30.0
    n_idle_max: float = 20000.0

    def check(self) -> None:
        m = len(self.zones)
        if m == 0 or any(len(z) != 3 or z[2] <= 0 for z in self.zones):
            raise ConfigError("zones need (x, y, positive area) triples")
        ids = set(range(1, m + 1))
        if not set(self.underserved) <= ids:
            raise ConfigError("underserved zones must be valid zone ids")
        for name, stops in self.lines:
            if not stops or not set(stops) <= ids:
                raise ConfigError(f"line {name} visits unknown zones")
        positive = ("tnc_trips_per_hour", "gravity_length", "circuity", "transit_detour", "outside_per_mile",
                    "bus_cost_per_vehicle_hour", "f_min", "f_max")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if not 0 < self.amod_share < 1:
            raise ConfigError("amod_share must lie in (0, 1)")
        if self.core_stations < 1 or self.remote_stations < 1:
            raise ConfigError("station counts must be >= 1")
        if self.trip_noise < 0 or self.remote_premium < 0:
            raise ConfigError("trip_noise and remote_premium must be nonnegative")


def _line_length(stops, road):
    idx = [s - 1 for s in stops]
    return float(sum(road[a, b] for a, b in zip(idx[:-1], idx[1:])))


def synthesize_sf_scenario(seed: int = 0, config: SyntheticConfig | None = None) -> Scenario:
    """Build the seeded San Francisco stand-in.

    Potential demand is a gravity matrix scaled so that the configured share
    of it equals the observed ride-hailing total. Everything except the trip
    noise is deterministic.
    """
    cfg = config or SyntheticConfig()
    cfg.check()
    rng = np.random.default_rng(seed)
    xyz = np.asarray(cfg.zones, dtype=float)
    xy, area = xyz[:, :2], xyz[:, 2]
    m = len(area)
    remote = np.zeros(m, dtype=bool)
    remote[[u - 1 for u in cfg.underserved]] = True

    euclid = np.linalg.norm(xy[:, None] - xy[None, :], axis=-1)
    road = cfg.circuity * euclid + np.diag(0.5 * np.sqrt(area))
    transit = cfg.transit_detour * road
    np.fill_diagonal(transit, 0.0)

    zones = [
        Zone(
            n + 1,
            area=float(area[n]),
            matching_scale=float(MATCHING_PER_AREA * area[n] / 60.0),
            firstmile_scale=float(FIRSTMILE_PER_AREA * area[n]),
            station_count=cfg.remote_stations if remote[n] else cfg.core_stations,
            is_underserved=bool(remote[n]),
            population_split=REMOTE_SPLIT if remote[n] else CORE_SPLIT,
        )
        for n in range(m)
    ]
    v_p = 17.937, 14.349
    lines = []
    for lid, (name, stops) in enumerate(cfg.lines, start=1):
        # C_l: cost of one vehicle-hour times the round-trip vehicles needed per unit frequency
        cycle = 2.0 * max(_line_length(stops, road), 1.0) / v_p[1]
        lines.append(TransitLine(lid, tuple(stops), op_cost=round(cfg.bus_cost_per_vehicle_hour * cycle, 2),
                                 f_min=cfg.f_min, f_max=cfg.f_max, name=name))
    try:
        network = build_network(zones, lines, road, transit)
    except ValidationError as exc:
        raise ConfigError(f"network construction failed: {exc}") from exc

    weight = np.where(remote, 1.0, cfg.core_trip_weight) * area ** 0.5
    tnc = weight[:, None] * weight[None, :] * np.exp(-euclid / cfg.gravity_length)
    tnc *= rng.lognormal(0.0, cfg.trip_noise, (m, m)) if cfg.trip_noise > 0 else 1.0
    tnc *= cfg.tnc_trips_per_hour / tnc.sum()
    lam0 = tnc / cfg.amod_share
    splits = np.array([z.population_split for z in zones])
    demand0 = lam0[:, :, None] * splits[:, None, :]

    per_mile = cfg.outside_per_mile * np.where(remote, 1.0 + cfg.remote_premium, 1.0)
    outside = (per_mile[:, None] * road)[:, :, None] * np.asarray(OUTSIDE_CLASS_RATIO)[None, None, :]
    behavior = BehaviorParams(
        epsilon=0.10, v_a=v_p[0], v_p=v_p[1], v_w=3.48, classes=SF_CLASSES, outside_cost=outside,
    )
    return Scenario(
        network, behavior, demand0, c_av=cfg.c_av, r_p_max=3.0, w_p_max=1.0 / 3.0, pi_0=1e4,
        name=f"sf-synthetic-{seed}", n_idle_max=cfg.n_idle_max,
        metadata={
            "generator": "sf-synthetic",
            "seed": int(seed),
            "matching_scale_per_area": MATCHING_PER_AREA,
            "matching_scale_unit": "minutes*sqrt(veh)/sq mile, stored in hours",
            "firstmile_scale_per_area": FIRSTMILE_PER_AREA,
            "w_p_max_minutes": 20,
            "amod_share": cfg.amod_share,
            "tnc_trips_per_hour": cfg.tnc_trips_per_hour,
            "outside_per_mile": cfg.outside_per_mile,
            "remote_premium": cfg.remote_premium,
            "outside_class_ratio": list(OUTSIDE_CLASS_RATIO),
            "bus_cost_per_vehicle_hour": cfg.bus_cost_per_vehicle_hour,
            "zone_xy_miles": [list(z[:2]) for z in cfg.zones],
        },
    )
