"""Domain types shared by the analytic and Monte Carlo engines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TRACE_SLACK = 1e-12


@dataclass(frozen=True)
class ChannelSpec:
    """Antenna counts, target rate (nats per channel use) and total power."""

    t: int
    r: int
    rate_R: float
    power_P: float

    def __post_init__(self):
        if int(self.t) != self.t or self.t < 1:
            raise ValueError(f"t must be a positive integer, got {self.t}")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r}")
        if not (self.rate_R > 0 and math.isfinite(self.rate_R)):
            raise ValueError(f"rate_R must be positive and finite, got {self.rate_R}")
        if not (self.power_P > 0 and math.isfinite(self.power_P)):
            raise ValueError(f"power_P must be positive and finite, got {self.power_P}")
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "rate_R", float(self.rate_R))
        object.__setattr__(self, "power_P", float(self.power_P))

    @property
    def u(self) -> float:
        """Determinant threshold minus one, e^R - 1."""
        return math.expm1(self.rate_R)

    @property
    def threshold(self) -> float:
        return math.exp(self.rate_R)

    def require_timo(self) -> None:
        if self.t != 2:
            raise ValueError(f"operation needs t = 2 transmit antennas, got t={self.t}")


@dataclass(frozen=True)
class PowerSplit:
    """Diagonal power allocation (q1, q2) for two transmit antennas."""

    q1: float
    q2: float

    def __post_init__(self):
        for name in ("q1", "q2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite non-negative power, got {v}")
            object.__setattr__(self, name, float(v))

    @classmethod
    def on_line(cls, q1: float, total: float) -> "PowerSplit":
        """Split with q1 + q2 = total."""
        if not 0 <= q1 <= total:
            raise ValueError(f"q1={q1} outside [0, {total}]")
        return cls(q1, total - q1)

    def swapped(self) -> "PowerSplit":
        return PowerSplit(self.q2, self.q1)

    def check(self, spec: ChannelSpec) -> None:
        """Raise unless q1 + q2 equals the channel's total power."""
        if abs(self.q1 + self.q2 - spec.power_P) > TRACE_SLACK:
            raise ValueError(f"q1 + q2 = {self.q1 + self.q2!r} differs from P = {spec.power_P!r}")


METHODS = ("quadrature", "mc_direct", "mc_reduced", "mc_special_q")


@dataclass(frozen=True)
class OutageEstimate:
    """A probability with its uncertainty.

    For quadrature ``stderr`` holds the integration error bound and
    ``n_samples`` is 1; for Monte Carlo it is the binomial standard error.
    ``n_errors`` counts draws whose determinant could not be factorized.
    """

    p_hat: float
    stderr: float
    n_samples: int
    method: str
    n_errors: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")

    @property
    def value(self) -> float:
        return self.p_hat

    @classmethod
    def from_counts(cls, hits: int, n: int, method: str, n_errors: int = 0, meta=None) -> "OutageEstimate":
        p = hits / n
        se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
        return cls(p, se, n, method, n_errors, dict(meta or {}))


def as_power_vector(q, total: float | None = None) -> np.ndarray:
    """Validate a diagonal power allocation and return it as a float array."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("power vector must be a non-empty 1-D sequence")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError(f"powers must be finite and non-negative, got {q}")
    if total is not None and abs(q.sum() - total) > TRACE_SLACK:
        raise ValueError(f"powers sum to {q.sum()!r}, expected {total!r}")
    return q
