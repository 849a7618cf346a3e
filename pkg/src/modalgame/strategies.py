"""Operator strategies and regulatory policy settings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

IDLE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class TncStrategy:
    """Base fare ($/trip), per-zone rate ($/mile) and per-zone idle vehicles."""

    b: float
    r: np.ndarray
    n_idle: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "n_idle", np.asarray(self.n_idle, dtype=float))
        if self.r.shape != self.n_idle.shape:
            raise ValidationError("r and n_idle must have the same length")

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.b], self.r, self.n_idle))

    @classmethod
    def from_vector(cls, x) -> "TncStrategy":
        x = np.asarray(x, dtype=float)
        m = (len(x) - 1) // 2
        return cls(float(x[0]), x[1 : 1 + m].copy(), x[1 + m :].copy())

    def scaled_vector(self, idle_scale: float = 100.0) -> np.ndarray:
        """Vector used in convergence norms; idle counts are divided by ``idle_scale``."""
        return np.concatenate(([self.b], self.r, self.n_idle / idle_scale))

    def __eq__(self, other):
        return isinstance(other, TncStrategy) and np.array_equal(self.as_vector(), other.as_vector())

    def to_dict(self) -> dict:
        return {"base_fare": self.b, "rate_per_mile": self.r.tolist(), "idle_vehicles": self.n_idle.tolist()}

    @classmethod
    def from_dict(cls, d) -> "TncStrategy":
        return cls(float(d["base_fare"]), d["rate_per_mile"], d["idle_vehicles"])


@dataclass(frozen=True, eq=False)
class TransitStrategy:
    """Per-mile fare ($/mile) and per-line frequencies (vehicles/hour)."""

    r_p: float
    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.r_p], self.f))

    @classmethod
    def from_vector(cls, x) -> "TransitStrategy":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), x[1:].copy())

    def __eq__(self, other):
        return isinstance(other, TransitStrategy) and np.array_equal(self.as_vector(), other.as_vector())

    def to_dict(self) -> dict:
        return {"fare_per_mile": self.r_p, "frequencies_per_hour": self.f.tolist()}

    @classmethod
    def from_dict(cls, d) -> "TransitStrategy":
        return cls(float(d["fare_per_mile"]), d["frequencies_per_hour"])


@dataclass(frozen=True)
class PolicyConfig:
    """Minimum service level (max AMoD wait, hours; None = off) and bundle subsidy ($/leg)."""

    w_a_max: float | None = None
    subsidy: float = 0.0

    def __post_init__(self):
        if self.w_a_max is not None and not self.w_a_max > 0:
            raise ValidationError("must be positive when enabled", "policy.w_a_max_hours")
        if self.w_a_max is not None and np.isinf(self.w_a_max):
            object.__setattr__(self, "w_a_max", None)
        if not self.subsidy >= 0:
            raise ValidationError("must be nonnegative", "policy.subsidy_per_leg")

    def idle_floor(self, matching_scale: np.ndarray) -> np.ndarray:
        """Per-zone lower bound on idle vehicles implied by the wait cap."""
        floor = np.full(len(matching_scale), IDLE_FLOOR)
        if self.w_a_max is not None:
            floor = np.maximum(floor, (np.asarray(matching_scale) / self.w_a_max) ** 2)
        return floor
