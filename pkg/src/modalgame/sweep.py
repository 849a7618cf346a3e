"""Policy and cost sweeps over the equilibrium, with CSV/JSON export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .choice import A, B1, B2, B3, MODES, amod_wait_time, demand_tensor, fleet_hours
from .equilibrium import best_response_iterate, default_initial_strategies, expost_evaluate
from .equity import accessibility, aggregate_accessibility, scenario_shift, theil_decompose
from .choice import cost_tensor
from .errors import IoError, ModalGameError, ValidationError
from .network import partition_zones
from .tnc import TncSolverConfig
from .transit import TransitSolverConfig

RESULTS_SCHEMA_VERSION = 1
AXES = ("c_av", "w_a_max", "subsidy")

# flat CSV columns, in order
CSV_COLUMNS = (
    "axis", "value", "status", "converged", "iterations",
    "base_fare", "mean_rate_per_mile", "mean_amod_fare", "idle_fleet", "total_fleet",
    "tnc_revenue", "tnc_cost", "tnc_profit", "tnc_upper", "tnc_lower", "epsilon_abs", "epsilon_rel",
    "transit_fare_per_mile", "mean_frequency", "transit_ridership", "transit_revenue", "transit_cost",
    "transit_profit", "transit_global",
    "theil_T", "theil_within", "theil_between", "theil_shift",
    "share_amod", "share_transit", "share_bundle", "share_outside",
)


@dataclass
class SweepConfig:
    sigma: float = 1e-3
    max_iter: int = 50
    partition: str = "pairwise"
    expost: bool = True
    initial_variant: int = 0
    theil_shift: float | None = None  # default: scenario_shift of the base scenario
    tnc: TncSolverConfig | None = None
    transit: TransitSolverConfig | None = None


@dataclass
class SweepRecord:
    value: float
    status: str = "ok"
    error: str | None = None
    converged: bool = False
    iterations: int = 0
    tnc: dict = field(default_factory=dict)
    transit: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    epsilon: dict = field(default_factory=dict)
    theil: dict = field(default_factory=dict)
    shares_by_class: list = field(default_factory=list)  # K x 6, mode order as MODES
    accessibility_by_class: list = field(default_factory=list)
    idle_by_zone: list = field(default_factory=list)
    wait_by_zone_hours: list = field(default_factory=list)


@dataclass
class SweepResults:
    axis: str
    records: list = field(default_factory=list)
    theil_shift: float = 0.0
    scenario_name: str = ""
    schema_version: int = RESULTS_SCHEMA_VERSION

    def column(self, key: str) -> np.ndarray:
        """One flat CSV column across records (nan where missing)."""
        return np.array([_flat_row(self.axis, r).get(key, np.nan) for r in self.records], dtype=float)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "axis": self.axis,
            "scenario": self.scenario_name,
            "theil_shift": self.theil_shift,
            "mode_order": list(MODES),
            "records": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResults":
        if d.get("schema_version") != RESULTS_SCHEMA_VERSION:
            raise ValidationError(f"unsupported results schema {d.get('schema_version')}", "schema_version")
        recs = [SweepRecord(**r) for r in d["records"]]
        return cls(d["axis"], recs, d["theil_shift"], d.get("scenario", ""), d["schema_version"])


def certificate_dict(cert) -> dict | None:
    if cert is None:
        return None
    return {
        "holds": bool(cert.holds),
        "threshold_per_hour": float(cert.threshold),
        "n_bar_max_per_hour": float(np.max(cert.n_bar)),
        "min_margin": float(cert.min_margin),
        "r_p_grid_size": int(np.size(cert.r_p_grid)),
    }


def apply_axis(scenario, axis: str, value: float):
    """Scenario with one sweep parameter replaced."""
    if axis == "c_av":
        return scenario.with_updates(c_av=float(value))
    if axis == "w_a_max":
        return scenario.with_policy(w_a_max=None if not np.isfinite(value) else float(value))
    if axis == "subsidy":
        return scenario.with_policy(subsidy=float(value))
    raise ValidationError(f"unknown axis {axis!r}; expected one of {AXES}", "axis")


def outcome_metrics(scenario, tnc, transit) -> dict:
    """Operator revenues/costs, fleet, fares and modal shares at a strategy profile."""
    net = scenario.network
    dem = demand_tensor(scenario, tnc, transit)
    lam = dem.by_mode
    la = net.road_distance[:, :, None]
    d = net.firstmile_distance
    di, dj = d[:, None, None], d[None, :, None]
    ri, rj = tnc.r[:, None, None], tnc.r[None, :, None]
    b = tnc.b
    fare_a = lam[..., A] * (b + ri * la)
    fare_b = lam[..., B1] * (b + ri * di) + lam[..., B2] * (b + rj * dj) + lam[..., B3] * (2 * b + ri * di + rj * dj)
    legs = lam[..., A].sum() + lam[..., B1].sum() + lam[..., B2].sum() + 2 * lam[..., B3].sum()
    tnc_revenue = float(fare_a.sum() + fare_b.sum())
    w = amod_wait_time(net.matching_scale, tnc.n_idle)
    fleet = fleet_hours(dem, w, net, scenario.behavior.v_a, tnc.n_idle)
    riders = dem.transit_riders.sum(axis=-1)
    tr_rev = transit.r_p * float(np.sum(net.transit_distance * riders))
    tr_cost = float(transit.f @ net.line_cost)
    total = lam.sum()
    by_mode = lam.sum(axis=(0, 1, 2)) / total
    return {
        "base_fare": float(b),
        "mean_rate_per_mile": float(np.mean(tnc.r)),
        "mean_amod_fare": tnc_revenue / legs if legs > 0 else float("nan"),
        "idle_fleet": float(np.sum(tnc.n_idle)),
        "total_fleet": float(fleet),
        "tnc_revenue": tnc_revenue,
        "tnc_cost": float(scenario.c_av * fleet),
        "tnc_profit": float(tnc_revenue - scenario.c_av * fleet),
        "transit_fare_per_mile": float(transit.r_p),
        "mean_frequency": float(np.mean(transit.f)),
        "transit_ridership": float(riders.sum()),
        "transit_revenue": float(tr_rev),
        "transit_cost": tr_cost,
        "transit_profit": float(tr_rev - tr_cost),
        "share_amod": float(by_mode[A]),
        "share_transit": float(by_mode[1]),
        "share_bundle": float(by_mode[B1] + by_mode[B2] + by_mode[B3]),
        "share_outside": float(by_mode[-1]),
    }, dem, w


def solve_point(scenario, warm=None, config: SweepConfig | None = None, value: float = float("nan")):
    """Equilibrium, ex-post report, equity and outcome metrics for one scenario.

    Returns ``(record, candidate)``; ``candidate`` is None when the point failed.
    """
    cfg = config or SweepConfig()
    rec = SweepRecord(value=float(value))
    cand = None
    try:
        init = warm or default_initial_strategies(scenario, cfg.initial_variant)
        cand = best_response_iterate(init[0], init[1], scenario, cfg.sigma, cfg.max_iter, cfg.tnc, cfg.transit)
        rec.converged, rec.iterations = cand.converged, cand.iterations
        rec.tnc, rec.transit = cand.tnc.to_dict(), cand.transit.to_dict()
        metrics, dem, w = outcome_metrics(scenario, cand.tnc, cand.transit)
        rec.metrics = metrics
        rec.idle_by_zone = cand.tnc.n_idle.tolist()
        rec.wait_by_zone_hours = w.tolist()
        shares = dem.by_mode.sum(axis=(0, 1))
        rec.shares_by_class = (shares / shares.sum(axis=1, keepdims=True)).tolist()
        acc = accessibility(cost_tensor(scenario, cand.tnc, cand.transit), scenario.behavior.epsilon)
        agg = aggregate_accessibility(dem, acc)
        shift = cfg.theil_shift if cfg.theil_shift is not None else scenario_shift(scenario)
        rec.theil = theil_decompose(dem, agg, shift).to_dict()
        rec.accessibility_by_class = agg.A_k.tolist()
        if cfg.expost:
            rep = expost_evaluate(cand, scenario, partition_zones(scenario.network, cfg.partition), cfg.tnc, cfg.transit)
            rec.epsilon = {
                "tnc_profit": rep.tnc_profit,
                "tnc_upper": rep.tnc_upper,
                "tnc_lower": rep.tnc_lower,
                "epsilon_abs": rep.epsilon_abs,
                "epsilon_rel": rep.epsilon_rel,
                "transit_global": rep.transit_global,
                "transit_resolve_ridership": rep.transit_resolve_ridership,
                "certificate": certificate_dict(rep.certificate),
            }
        if not cand.converged:
            rec.status = "not_converged"
    except ModalGameError as exc:
        rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
        cand = None
    return rec, cand


def run_sweep(scenario, axis: str, values, config: SweepConfig | None = None) -> SweepResults:
    """Solve the game at every value of ``axis``, in the order given.

    Each point is warm-started from the previous point's equilibrium; the
    records come back sorted by parameter value. A failing point is recorded
    with its error and the sweep moves on.
    """
    cfg = config or SweepConfig()
    values = [float(v) for v in values]
    if not values:
        raise ValidationError("need at least one sweep value", "values")
    if axis not in AXES:
        raise ValidationError(f"unknown axis {axis!r}; expected one of {AXES}", "axis")
    shift = cfg.theil_shift if cfg.theil_shift is not None else scenario_shift(scenario)
    cfg = SweepConfig(**{**cfg.__dict__, "theil_shift": shift})
    records, warm = [], None
    for v in values:
        try:
            point = apply_axis(scenario, axis, v)
        except ValidationError as exc:
            records.append(SweepRecord(value=v, status="failed", error=f"ValidationError: {exc}"))
            continue
        rec, cand = solve_point(point, warm, cfg, v)
        if cand is not None:
            warm = (cand.tnc, cand.transit)
        records.append(rec)
    records.sort(key=lambda r: r.value)
    return SweepResults(axis, records, shift, scenario.name)


def _flat_row(axis: str, rec: SweepRecord) -> dict:
    row = {"axis": axis, "value": rec.value, "status": rec.status, "converged": rec.converged,
           "iterations": rec.iterations}
    row.update(rec.metrics)
    for k in ("tnc_upper", "tnc_lower", "epsilon_abs", "epsilon_rel", "transit_global"):
        if k in rec.epsilon:
            row[k] = rec.epsilon[k]
    if rec.theil:
        row.update({"theil_T": rec.theil["T"], "theil_within": rec.theil["within"],
                    "theil_between": rec.theil["between"], "theil_shift": rec.theil["shift"]})
    return row


def export_results(results: SweepResults, path, fmt: str = "csv") -> None:
    """Write one CSV row per point (columns fixed by CSV_COLUMNS) or the full JSON structure."""
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown format {fmt!r}", "format")
    try:
        if fmt == "json":
            path.write_text(json.dumps(results.to_dict(), indent=1, allow_nan=True))
            return
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for rec in results.records:
                writer.writerow(_flat_row(results.axis, rec))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_results(path) -> SweepResults:
    return SweepResults.from_dict(json.loads(Path(path).read_text()))
