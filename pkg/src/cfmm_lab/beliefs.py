"""Samplers for arbitrageurs' private price beliefs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidDistribution

KINDS = ("gaussian", "pareto", "uniform")


@dataclass(frozen=True)
class BeliefDistribution:
    """Prices drawn around a [low, high] band and clamped into it.

    ``gaussian`` centres on the band midpoint with standard deviation
    ``sigma_rel * midpoint``; ``pareto`` has scale ``low`` and shape
    ``alpha``; ``uniform`` covers the band evenly.
    """

    kind: str
    low: float
    high: float
    sigma_rel: float = 0.001
    alpha: float = 1.5

    def check(self) -> None:
        if self.kind not in KINDS:
            raise InvalidDistribution(f"unknown belief distribution {self.kind!r}")
        if not (0 < self.low <= self.high) or math.isinf(self.high):
            raise InvalidDistribution(f"need 0 < low <= high < inf, got [{self.low}, {self.high}]")
        if self.kind == "gaussian" and not self.sigma_rel >= 0:
            raise InvalidDistribution("sigma_rel must be non-negative")
        if self.kind == "pareto" and not self.alpha > 1:
            raise InvalidDistribution("pareto shape must exceed 1")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.low + self.high)

    def for_band(self, low: float, high: float) -> BeliefDistribution:
        return BeliefDistribution(self.kind, low, high, self.sigma_rel, self.alpha)

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "low": self.low, "high": self.high, "sigma_rel": self.sigma_rel, "alpha": self.alpha}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> BeliefDistribution:
        return cls(
            str(data["kind"]),
            float(data.get("low", 1.0)),
            float(data.get("high", 1.0)),
            float(data.get("sigma_rel", 0.001)),
            float(data.get("alpha", 1.5)),
        )


def sample_beliefs(dist: BeliefDistribution, n: int | tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` positive prices from ``dist``, clamped to its band."""
    dist.check()
    if dist.kind == "gaussian":
        mid = dist.midpoint
        draws = rng.normal(mid, dist.sigma_rel * mid, size=n) if dist.sigma_rel > 0 else np.full(n, mid)
    elif dist.kind == "pareto":
        # inverse-CDF sampling keeps the scale parameter exact
        draws = dist.low / (1.0 - rng.random(size=n)) ** (1.0 / dist.alpha)
    else:
        draws = rng.uniform(dist.low, dist.high, size=n)
    return np.clip(draws, dist.low, dist.high)
