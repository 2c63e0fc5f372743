from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from aloha.constants import DIST_SUM_TOL, S_MAX_DEFAULT
from errors import ConfigError, UnknownDistribution


@dataclass(frozen=True)
class DegreeDistribution:
    """Temporal degree distribution, dense over degrees 1..s_max (probs[0] is degree 1)."""

    probs: Tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        if not probs:
            raise ConfigError("invalid_distribution", "Degree distribution needs at least one degree.")
        for s, p in enumerate(probs, start=1):
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise ConfigError("invalid_distribution", f"Lambda_{s}={p} is outside [0, 1].")
        total = math.fsum(probs)
        if abs(total - 1.0) > DIST_SUM_TOL:
            raise ConfigError("invalid_distribution", f"Degree probabilities sum to {total!r}, not 1.")
        object.__setattr__(self, "probs", probs)

    @property
    def s_max(self) -> int:
        return len(self.probs)

    @property
    def max_degree(self) -> int:
        return max(s for s, p in enumerate(self.probs, start=1) if p > 0.0)

    @property
    def mean(self) -> float:
        return mean_degree(self)

    def prob(self, s: int) -> float:
        if 1 <= s <= self.s_max:
            return self.probs[s - 1]
        return 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def degrees(self) -> np.ndarray:
        return np.arange(1, self.s_max + 1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return sample_degrees(self, rng, size)

    def pairs(self) -> Iterable[Tuple[int, float]]:
        return [(s, p) for s, p in enumerate(self.probs, start=1) if p > 0.0]


def mean_degree(dist: DegreeDistribution) -> float:
    return math.fsum(s * p for s, p in enumerate(dist.probs, start=1))


def sample_degrees(dist: DegreeDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    if size <= 0:
        return np.zeros(0, dtype=int)
    return rng.choice(dist.degrees(), size=size, p=dist.as_array())


def from_pairs(pairs: Sequence[Sequence[float]], s_max: int = S_MAX_DEFAULT) -> DegreeDistribution:
    probs = [0.0] * s_max
    for item in pairs:
        if len(item) != 2:
            raise ConfigError("invalid_distribution", f"Expected (degree, probability) pair, got {item!r}.")
        degree, prob = int(item[0]), float(item[1])
        if degree < 1:
            raise ConfigError("invalid_distribution", f"Degree {degree} must be >= 1.")
        if degree > len(probs):
            probs.extend([0.0] * (degree - len(probs)))
        probs[degree - 1] += prob
    return DegreeDistribution(tuple(probs))


def point_mass(s: int, s_max: int = S_MAX_DEFAULT) -> DegreeDistribution:
    return from_pairs([(s, 1.0)], s_max=s_max)


def two_mass(lambda1: float, s_max: int = S_MAX_DEFAULT) -> DegreeDistribution:
    """(Lambda_1, 1 - Lambda_1) over degrees one and two."""
    lambda1 = min(1.0, max(0.0, float(lambda1)))
    return from_pairs([(1, lambda1), (2, 1.0 - lambda1)], s_max=s_max)


NAMED_DISTRIBUTIONS: Dict[str, Tuple[Tuple[int, float], ...]] = {
    "ALOHA": ((1, 1.0),),
    "CRDSA2": ((2, 1.0),),
    "IRSA": ((2, 0.5), (3, 0.28), (8, 0.22)),
}

# Published optimized distributions, rounded to two decimals, keyed by delta.
TABLE1: Dict[float, Tuple[float, ...]] = {
    0.1: (0.0, 0.54, 0.26, 0.01, 0.0, 0.01, 0.0, 0.18),
    0.3: (0.0, 0.62, 0.20, 0.0, 0.0, 0.0, 0.09, 0.09),
    0.5: (0.0, 0.68, 0.17, 0.0, 0.0, 0.0, 0.0, 0.15),
    1.0: (0.0, 0.91, 0.0, 0.0, 0.0, 0.0, 0.0, 0.09),
    2.0: (0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    3.0: (0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    5.0: (0.01, 0.99, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    7.0: (0.10, 0.90, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
}


def named_distribution(name: str, s_max: int = S_MAX_DEFAULT) -> DegreeDistribution:
    key = (name or "").strip().upper()
    if key not in NAMED_DISTRIBUTIONS:
        raise UnknownDistribution(name)
    return from_pairs(NAMED_DISTRIBUTIONS[key], s_max=s_max)


def table1_distribution(delta: float) -> DegreeDistribution:
    for key, probs in TABLE1.items():
        if abs(key - float(delta)) < 1e-9:
            return DegreeDistribution(probs)
    raise UnknownDistribution(f"table1:{delta}")


def total_variation(a: DegreeDistribution, b: DegreeDistribution) -> float:
    width = max(a.s_max, b.s_max)
    return 0.5 * math.fsum(abs(a.prob(s) - b.prob(s)) for s in range(1, width + 1))
