"""Generalized travel costs, waiting times, logit mode split and fleet-hour accounting.

Mode axis order everywhere is ``MODES = (a, p, b1, b2, b3, o)``: direct AMoD,
transit, first-mile bundle, last-mile bundle, both-ends bundle, outside option.
Units: dollars, hours, miles, trips/hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveIdleFleet, ValidationError, ZeroFrequencyOnUsedLine

MODES = ("a", "p", "b1", "b2", "b3", "o")
A, P, B1, B2, B3, O = range(6)
AMOD_MODES = (A, B1, B2, B3)
TRANSIT_MODES = (P, B1, B2, B3)


@dataclass(frozen=True)
class IncomeClassParams:
    alpha: float  # $/hour waiting
    beta: float  # $/hour in-vehicle
    gamma: float  # weight on money
    theta: float  # $/hour walking

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "theta"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", f"classes.{name}")
        if not (self.alpha > self.beta and self.theta > self.beta):
            raise ValidationError("waiting and walking weights must exceed the in-vehicle weight", "classes.beta")


@dataclass(frozen=True, eq=False)
class BehaviorParams:
    epsilon: float
    v_a: float
    v_p: float
    v_w: float
    classes: tuple[IncomeClassParams, ...]
    outside_cost: np.ndarray  # (M, M, K)

    def __post_init__(self):
        object.__setattr__(self, "outside_cost", np.asarray(self.outside_cost, dtype=float))
        if not self.epsilon >= 0:
            raise ValidationError("must be nonnegative", "behavior.epsilon")
        for name in ("v_a", "v_p", "v_w"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", f"behavior.{name}_mph")
        if np.any(self.outside_cost < 0):
            raise ValidationError("must be nonnegative", "behavior.outside_cost")
        if self.outside_cost.ndim != 3 or self.outside_cost.shape[2] != len(self.classes):
            raise ValidationError("expected shape (M, M, K)", "behavior.outside_cost")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        c = self.classes
        return (
            np.array([k.alpha for k in c]),
            np.array([k.beta for k in c]),
            np.array([k.gamma for k in c]),
            np.array([k.theta for k in c]),
        )


@dataclass(frozen=True, eq=False)
class DemandTensor:
    by_mode: np.ndarray  # (M, M, K, 6) trips/hour
    lam0: np.ndarray  # (M, M, K)

    def mode(self, t: int) -> np.ndarray:
        return self.by_mode[..., t]

    @property
    def transit_riders(self) -> np.ndarray:
        return self.by_mode[..., list(TRANSIT_MODES)].sum(axis=-1)


def amod_wait_time(matching_scale, n_idle):
    """Square-root law w = A / sqrt(N)."""
    n_idle = np.asarray(n_idle, dtype=float)
    if np.any(n_idle <= 0):
        raise NonpositiveIdleFleet("idle fleet must be positive in every zone")
    return np.asarray(matching_scale, dtype=float) / np.sqrt(n_idle)


def transit_wait_time(phi, f):
    """Average transit wait phi . [1/f_1, ..., 1/f_L]; works on any leading shape of ``phi``."""
    phi = np.asarray(phi, dtype=float)
    f = np.asarray(f, dtype=float)
    used = np.any(phi.reshape(-1, phi.shape[-1]) > 0, axis=0)
    if np.any(f[used] <= 0):
        raise ZeroFrequencyOnUsedLine("lines with positive route weight need positive frequency")
    inv = np.divide(1.0, f, out=np.zeros_like(f), where=f > 0)
    return phi @ inv


def logit_split(costs, epsilon, lam0):
    """Split ``lam0`` across the last axis of ``costs`` with a max-shifted softmax."""
    costs = np.asarray(costs, dtype=float)
    z = -epsilon * costs
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    shares = e / e.sum(axis=-1, keepdims=True)
    return np.asarray(lam0, dtype=float)[..., None] * shares


def partial_costs(scenario, transit, w_p, subsidy):
    """Cost tensor with every TNC-controlled term (fares, AMoD waits) left out."""
    net, beh = scenario.network, scenario.behavior
    alpha, beta, gamma, theta = (x[None, None, :] for x in beh.weights())
    la = net.road_distance[:, :, None]
    lp = net.transit_distance[:, :, None]
    d = net.firstmile_distance
    di, dj = d[:, None, None], d[None, :, None]
    u = net.underserved.astype(float)
    ui, uj = u[:, None, None], u[None, :, None]
    wp = w_p[:, :, None]
    fare_p = transit.r_p * lp
    walk = 1.0 / beh.v_w

    m, k = la.shape[0], alpha.shape[2]
    base = np.empty((m, m, k, 6))
    base[..., A] = beta * la / beh.v_a
    base[..., P] = alpha * wp + beta * lp / beh.v_p + gamma * fare_p + theta * (di + dj) * walk
    base[..., B1] = (
        alpha * wp + beta * (di / beh.v_a + lp / beh.v_p) + gamma * (fare_p - subsidy * ui) + theta * dj * walk
    )
    base[..., B2] = (
        alpha * wp + beta * (lp / beh.v_p + dj / beh.v_a) + gamma * (fare_p - subsidy * uj) + theta * di * walk
    )
    base[..., B3] = alpha * wp + beta * (di / beh.v_a + lp / beh.v_p + dj / beh.v_a) + gamma * (
        fare_p - subsidy * (ui + uj)
    )
    base[..., O] = beh.outside_cost
    return base


def base_costs(scenario, transit, subsidy=None):
    """TNC-independent part of every mode's generalized cost, shape (M, M, K, 6)."""
    if subsidy is None:
        subsidy = scenario.policy.subsidy
    w_p = transit_wait_time(scenario.network.phi, transit.f)
    return partial_costs(scenario, transit, w_p, subsidy)


def add_tnc_terms(scenario, base, tnc):
    """Add fares and AMoD waits of ``tnc`` to a TNC-free cost tensor (returns a new array)."""
    net = scenario.network
    alpha, _, gamma, _ = (x[None, None, :] for x in scenario.behavior.weights())
    w = amod_wait_time(net.matching_scale, tnc.n_idle)
    wi, wj = w[:, None, None], w[None, :, None]
    ri, rj = tnc.r[:, None, None], tnc.r[None, :, None]
    la = net.road_distance[:, :, None]
    d = net.firstmile_distance
    di, dj = d[:, None, None], d[None, :, None]
    b = tnc.b

    c = base.copy()
    c[..., A] += alpha * wi + gamma * (b + ri * la)
    c[..., B1] += alpha * wi + gamma * (b + ri * di)
    c[..., B2] += alpha * wj + gamma * (b + rj * dj)
    c[..., B3] += alpha * (wi + wj) + gamma * (2 * b + ri * di + rj * dj)
    return c


def cost_tensor(scenario, tnc, transit, subsidy=None):
    """Generalized costs c[i, j, k, t] for every OD pair, class and mode."""
    return add_tnc_terms(scenario, base_costs(scenario, transit, subsidy), tnc)


def generalized_costs(scenario, tnc, transit, i, j, k, subsidy=None) -> np.ndarray:
    """Six-mode cost vector for OD (i, j) and class k (0-based positions)."""
    return cost_tensor(scenario, tnc, transit, subsidy)[i, j, k]


def demand_tensor(scenario, tnc, transit, subsidy=None) -> DemandTensor:
    c = cost_tensor(scenario, tnc, transit, subsidy)
    lam = logit_split(c, scenario.behavior.epsilon, scenario.demand0)
    return DemandTensor(lam, scenario.demand0)


def fleet_hours(demand: DemandTensor, w_a, network, v_a, n_idle) -> float:
    """Total vehicle-hours: idle + pickup + occupied."""
    lam = demand.by_mode
    w_a = np.asarray(w_a, dtype=float)
    wi, wj = w_a[:, None, None], w_a[None, :, None]
    la = network.road_distance[:, :, None]
    d = network.firstmile_distance
    di, dj = d[:, None, None], d[None, :, None]
    pickup = lam[..., A] * wi + lam[..., B1] * wi + lam[..., B2] * wj + lam[..., B3] * (wi + wj)
    occupied = (lam[..., A] * la + lam[..., B1] * di + lam[..., B2] * dj + lam[..., B3] * (di + dj)) / v_a
    return float(np.sum(n_idle) + pickup.sum() + occupied.sum())
