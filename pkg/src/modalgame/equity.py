"""Logsum accessibility, demand-weighted aggregation and the Theil decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .choice import DemandTensor, cost_tensor, demand_tensor
from .errors import EmptyGroup, NonpositiveAccessibility


def accessibility(costs, epsilon: float) -> np.ndarray:
    """Expected maximum utility (1/eps) log sum_t exp(-eps c_t) over the last axis.

    Infinite costs drop out of the sum, so a single finite mode gives ``-c``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    c = np.asarray(costs, dtype=float)
    return logsumexp(-epsilon * c, axis=-1) / epsilon


@dataclass(eq=False)
class AccessibilityTensor:
    A_ijk: np.ndarray  # (M, M, K)
    A_ik: np.ndarray  # (M, K), nan on empty strata
    A_k: np.ndarray  # (K,), nan on empty classes
    A_bar: float
    lam_ik: np.ndarray
    lam_k: np.ndarray
    lam_bar: float
    empty_strata: list = field(default_factory=list)

    def shifted(self, shift: float) -> "AccessibilityTensor":
        """Same tensor with every accessibility moved by ``shift`` (weights unchanged)."""
        return AccessibilityTensor(
            self.A_ijk + shift, self.A_ik + shift, self.A_k + shift, self.A_bar + shift,
            self.lam_ik, self.lam_k, self.lam_bar, list(self.empty_strata),
        )


def _trips(demand) -> np.ndarray:
    if isinstance(demand, DemandTensor):
        return demand.by_mode.sum(axis=-1)
    return np.asarray(demand, dtype=float)


def aggregate_accessibility(demand, A_ijk) -> AccessibilityTensor:
    """Demand-weighted means of OD accessibility by origin/class, class and overall.

    ``demand`` is a DemandTensor (all modes, outside option included) or an
    (M, M, K) array of trips. Strata with zero demand are listed in
    ``empty_strata`` and left out of the higher aggregates.
    """
    lam = _trips(demand)
    A_ijk = np.asarray(A_ijk, dtype=float)
    if lam.shape != A_ijk.shape:
        raise ValueError(f"demand shape {lam.shape} does not match accessibility shape {A_ijk.shape}")
    lam_ik = lam.sum(axis=1)
    lam_k = lam_ik.sum(axis=0)
    lam_bar = float(lam_k.sum())
    if lam_bar <= 0:
        raise EmptyGroup("total demand is zero")
    num_ik = (lam * A_ijk).sum(axis=1)
    A_ik = np.divide(num_ik, lam_ik, out=np.full_like(num_ik, np.nan), where=lam_ik > 0)
    num_k = np.where(lam_ik > 0, lam_ik * np.nan_to_num(A_ik), 0.0).sum(axis=0)
    A_k = np.divide(num_k, lam_k, out=np.full_like(num_k, np.nan), where=lam_k > 0)
    A_bar = float(np.where(lam_k > 0, lam_k * np.nan_to_num(A_k), 0.0).sum() / lam_bar)
    empty = [(int(i), int(k)) for i, k in zip(*np.nonzero(lam_ik <= 0))]
    return AccessibilityTensor(A_ijk, A_ik, A_k, A_bar, lam_ik, lam_k, lam_bar, empty)


@dataclass
class TheilReport:
    T: float
    within: float
    between: float
    shift: float = 0.0

    def to_dict(self) -> dict:
        return {"T": self.T, "within": self.within, "between": self.between, "shift": self.shift}


def positivity_shift(values, floor: float = 1.0) -> float:
    """Smallest non-negative constant that lifts ``min(values)`` to ``floor``."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return float(max(0.0, floor - v.min())) if v.size else 0.0


def scenario_shift(scenario) -> float:
    """Strategy-independent shift: logsum accessibility is at least -c_outside, so
    ``1 + max c_outside`` lifts every accessibility of the scenario to at least 1."""
    return float(1.0 + max(0.0, np.max(scenario.behavior.outside_cost)))


def theil_decompose(demand, acc, shift: float = 0.0) -> TheilReport:
    """Theil coefficient split into a spatial (within-class) and a social (between-class) part.

    ``acc`` is an AccessibilityTensor, in which case ``demand`` is ignored in
    favour of its stored weights, or an (M, K) array of stratum
    accessibilities paired with an (M, K) array of stratum demand.
    ``shift`` is added to every accessibility first.
    """
    if isinstance(acc, AccessibilityTensor):
        lam_ik, A_ik = acc.lam_ik, acc.A_ik
    else:
        lam_ik = np.asarray(demand, dtype=float)
        A_ik = np.asarray(acc, dtype=float)
        if lam_ik.shape != A_ik.shape:
            raise ValueError("stratum demand and accessibility shapes differ")
    live = lam_ik > 0
    if not live.any():
        raise EmptyGroup("total demand is zero")
    A_ik = np.where(live, A_ik + shift, np.nan)
    if np.any(A_ik[live] <= 0):
        raise NonpositiveAccessibility("Theil index needs strictly positive accessibility; pass a shift")
    lam_k = np.where(live, lam_ik, 0.0).sum(axis=0)
    lam_bar = lam_k.sum()
    w_ik = np.where(live, lam_ik, 0.0)
    A_k = np.divide((w_ik * np.nan_to_num(A_ik)).sum(axis=0), lam_k, out=np.ones_like(lam_k), where=lam_k > 0)
    A_bar = float((lam_k * A_k).sum() / lam_bar)

    ratio = np.where(live, A_ik / A_k[None, :], 1.0)
    within = float(np.sum((w_ik / lam_bar) * ratio * np.log(ratio)))
    rk = A_k / A_bar
    between = float(np.sum((lam_k / lam_bar) * rk * np.log(rk)))
    return TheilReport(within + between, within, between, float(shift))


def equity_report(scenario, tnc, transit, shift: float | None = None, subsidy=None):
    """Accessibility aggregates and Theil report at a strategy profile.

    With ``shift=None`` the scenario-level shift from :func:`scenario_shift`
    is used, so reports at different strategy profiles stay comparable.
    """
    eps = scenario.behavior.epsilon
    a = accessibility(cost_tensor(scenario, tnc, transit, subsidy), eps)
    dem = demand_tensor(scenario, tnc, transit, subsidy)
    agg = aggregate_accessibility(dem, a)
    if shift is None:
        shift = scenario_shift(scenario)
    return agg, theil_decompose(dem, agg, shift)
