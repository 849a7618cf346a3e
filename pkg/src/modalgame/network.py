"""Multimodal network: zones, transit lines, route sets and zone partitions.

Zone and line ids are 1-based as in the scenario file; every array on
:class:`MultimodalNetwork` is indexed by position (0-based).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import DimensionMismatch, UnreachableOD, ValidationError

MAX_LINES_PER_ROUTE = 3  # at most two transfers


@dataclass(frozen=True)
class Zone:
    id: int
    area: float
    matching_scale: float
    firstmile_scale: float
    station_count: int
    is_underserved: bool = False
    population_split: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if not self.area > 0:
            raise ValidationError("area must be positive", f"zones[{self.id}].area")
        if not self.matching_scale > 0:
            raise ValidationError("must be positive", f"zones[{self.id}].matching_scale")
        if not self.firstmile_scale > 0:
            raise ValidationError("must be positive", f"zones[{self.id}].firstmile_scale")
        if self.station_count < 1:
            raise ValidationError("must be >= 1", f"zones[{self.id}].station_count")
        split = np.asarray(self.population_split, dtype=float)
        if np.any(split < 0) or abs(split.sum() - 1.0) > 1e-9:
            raise ValidationError(
                "entries must be nonnegative and sum to 1", f"zones[{self.id}].population_split"
            )

    @property
    def firstmile_distance(self) -> float:
        """Square-root law d_i = B_i / sqrt(N_i^T)."""
        return self.firstmile_scale / np.sqrt(self.station_count)


@dataclass(frozen=True)
class TransitLine:
    id: int
    stations: tuple[int, ...]
    op_cost: float
    f_min: float = 0.1
    f_max: float = 60.0
    name: str = ""

    def __post_init__(self):
        if not self.stations:
            raise ValidationError("stations must be non-empty", f"lines[{self.id}].stations")
        if not self.op_cost >= 0:
            raise ValidationError("must be nonnegative", f"lines[{self.id}].op_cost")
        if not (0 < self.f_min <= self.f_max):
            raise ValidationError("need 0 < f_min <= f_max", f"lines[{self.id}].f_min")


@dataclass(frozen=True)
class RouteSet:
    od: tuple[int, int]
    routes: tuple[frozenset, ...]

    @property
    def count(self) -> int:
        return len(self.routes)


@dataclass(frozen=True)
class Partition:
    cells: tuple[tuple[int, ...], ...]  # 0-based zone indices

    def validate(self, n_zones: int) -> None:
        seen: set[int] = set()
        for cell in self.cells:
            if not cell:
                raise ValidationError("partition cells must be non-empty")
            overlap = seen.intersection(cell)
            if overlap:
                raise ValidationError(f"zones {sorted(overlap)} appear in more than one cell")
            seen.update(cell)
        if seen != set(range(n_zones)):
            raise ValidationError("partition does not cover every zone")


@dataclass(frozen=True, eq=False)
class MultimodalNetwork:
    zones: tuple[Zone, ...]
    lines: tuple[TransitLine, ...]
    road_distance: np.ndarray
    transit_distance: np.ndarray
    firstmile_distance: np.ndarray
    route_sets: dict = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def matching_scale(self) -> np.ndarray:
        return np.array([z.matching_scale for z in self.zones])

    @property
    def underserved(self) -> np.ndarray:
        return np.array([z.is_underserved for z in self.zones], dtype=bool)

    @property
    def line_cost(self) -> np.ndarray:
        return np.array([ln.op_cost for ln in self.lines])

    @property
    def f_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([ln.f_min for ln in self.lines]),
            np.array([ln.f_max for ln in self.lines]),
        )

    def zone_index(self, zone_id: int) -> int:
        for pos, z in enumerate(self.zones):
            if z.id == zone_id:
                return pos
        raise KeyError(zone_id)


def _line_membership(zones, lines):
    zone_pos = {z.id: pos for pos, z in enumerate(zones)}
    through = [set() for _ in zones]
    for ln in lines:
        for zid in ln.stations:
            if zid not in zone_pos:
                raise ValidationError(f"unknown zone id {zid}", f"lines[{ln.id}].stations")
            through[zone_pos[zid]].add(ln.id)
    return through


def _line_adjacency(lines):
    adj = {ln.id: set() for ln in lines}
    for a, b in product(lines, lines):
        if a.id != b.id and set(a.stations) & set(b.stations):
            adj[a.id].add(b.id)
    return adj


def enumerate_transit_routes(zones, lines, i: int, j: int) -> RouteSet:
    """Minimal-transfer line-set routes between zone positions ``i`` and ``j``.

    Routes are found breadth-first on the line-adjacency graph (two lines are
    adjacent when they share a zone); only routes with the minimum number of
    lines are kept, up to three lines. Same-zone pairs get the single cheapest
    line through the zone.
    """
    through = _line_membership(zones, lines)
    od = (zones[i].id, zones[j].id)
    if not through[i] or not through[j]:
        raise UnreachableOD(f"no transit line serves OD {od}")
    if i == j:
        by_id = {ln.id: ln for ln in lines}
        cheapest = min(through[i], key=lambda lid: (by_id[lid].op_cost, lid))
        return RouteSet(od, (frozenset([cheapest]),))

    adj = _line_adjacency(lines)
    origin_lines, dest_lines = through[i], through[j]
    # paths are line sequences; frontier grows one transfer per level
    frontier = [(lid,) for lid in sorted(origin_lines)]
    for _ in range(MAX_LINES_PER_ROUTE):
        found = {frozenset(p) for p in frontier if p[-1] in dest_lines}
        if found:
            routes = tuple(sorted(found, key=lambda s: sorted(s)))
            return RouteSet(od, routes)
        frontier = [p + (nxt,) for p in frontier for nxt in sorted(adj[p[-1]]) if nxt not in p]
    raise UnreachableOD(f"OD {od} needs more than {MAX_LINES_PER_ROUTE - 1} transfers")


def build_phi(route_sets: dict, line_ids) -> np.ndarray:
    """Line-occurrence weights phi[i, j, l] = count(l in R_ij) / |R_ij|."""
    line_ids = list(line_ids)
    col = {lid: n for n, lid in enumerate(line_ids)}
    n = 1 + max(max(k) for k in route_sets)
    phi = np.zeros((n, n, len(line_ids)))
    for (i, j), rs in route_sets.items():
        if rs.count == 0:
            raise ValidationError(f"empty route set for OD {rs.od}")
        for route in rs.routes:
            for lid in route:
                phi[i, j, col[lid]] += 1.0
        phi[i, j] /= rs.count
    return phi


def build_network(zones, lines, road_distances, transit_distances) -> MultimodalNetwork:
    zones = tuple(zones)
    lines = tuple(lines)
    m = len(zones)
    la = np.array(road_distances, dtype=float)
    lp = np.array(transit_distances, dtype=float)
    errors = []
    if la.shape != (m, m):
        errors.append(f"road distances have shape {la.shape}, expected {(m, m)}")
    if lp.shape != (m, m):
        errors.append(f"transit distances have shape {lp.shape}, expected {(m, m)}")
    if errors:
        raise DimensionMismatch("; ".join(errors))
    if np.any(la < 0) or np.any(lp < 0):
        raise ValidationError("distances must be nonnegative")
    if len({z.id for z in zones}) != m or len({ln.id for ln in lines}) != len(lines):
        raise ValidationError("zone and line ids must be unique")

    through = _line_membership(zones, lines)
    missing = [zones[p].id for p in range(m) if not through[p]]
    if missing:
        raise UnreachableOD(f"zones {missing} are not traversed by any transit line")

    route_sets = {}
    for i, j in product(range(m), range(m)):
        route_sets[(i, j)] = enumerate_transit_routes(zones, lines, i, j)
    phi = build_phi(route_sets, [ln.id for ln in lines])
    d = np.array([z.firstmile_distance for z in zones])
    return MultimodalNetwork(zones, lines, la, lp, d, route_sets, phi)


def partition_zones(network_or_m, strategy: str = "pairwise") -> Partition:
    m = network_or_m if isinstance(network_or_m, int) else network_or_m.n_zones
    if strategy == "pairwise":
        cells = tuple(tuple(range(s, min(s + 2, m))) for s in range(0, m, 2))
    elif strategy == "singleton":
        cells = tuple((i,) for i in range(m))
    elif strategy == "whole":
        cells = (tuple(range(m)),)
    else:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    return Partition(cells)
