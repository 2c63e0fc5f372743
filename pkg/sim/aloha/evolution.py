from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from aloha.constants import (
    EVOLUTION_FP_TOL,
    EVOLUTION_MAX_ITERS,
    HSTAR_TOL,
    RHO_ONE_TOL,
    THRESHOLD_BISECT_TOL,
    THRESHOLD_GRID_J,
    THRESHOLD_MARGIN,
)
from aloha.records import Flagged
from aloha.traffic import DegreeDistribution
from errors import ConfigError


log = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class EvolutionParams:
    delta: float
    g: float
    dist: DegreeDistribution
    max_iters: int = EVOLUTION_MAX_ITERS
    fp_tol: float = EVOLUTION_FP_TOL

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ConfigError("invalid_evolution", f"delta={self.delta} must be > 0.")
        if self.g < 0.0:
            raise ConfigError("invalid_evolution", f"G={self.g} must be >= 0.")
        if self.max_iters < 1:
            raise ConfigError("invalid_evolution", "max_iters must be >= 1.")
        if self.fp_tol <= 0.0:
            raise ConfigError("invalid_evolution", "fp_tol must be > 0.")

    @property
    def lambda_mean(self) -> float:
        return self.dist.mean


@dataclass(frozen=True)
class EvolutionResult:
    p_final: float
    q_final: float
    iters: int
    p_trace: Tuple[float, ...] = field(repr=False)
    converged: bool = True


@dataclass(frozen=True)
class Prediction:
    g: float
    p_coll: float
    throughput: float


@dataclass(frozen=True)
class ThresholdRow:
    delta: float
    g_bullet: float
    stability: float
    flag: Optional[str] = None


def _unwrap(x_in: ArrayLike, value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(x_in) == 0 else value


def _weights(dist: DegreeDistribution) -> Tuple[np.ndarray, np.ndarray]:
    return dist.degrees().astype(float), dist.as_array()


def gamma_node(x: ArrayLike, delta: float, dist: DegreeDistribution) -> ArrayLike:
    """Gamma(x) = sum_s L_s exp(-delta (1 - x^s))."""
    s, lam = _weights(dist)
    xs = np.asarray(x, dtype=float)[..., None]
    value = np.sum(lam * np.exp(-delta * (1.0 - xs ** s)), axis=-1)
    return _unwrap(x, value)


def gamma_edge(x: ArrayLike, delta: float, dist: DegreeDistribution) -> ArrayLike:
    """Edge perspective of gamma_node; equals Gamma'(x) / Gamma'(1)."""
    s, lam = _weights(dist)
    xs = np.asarray(x, dtype=float)[..., None]
    coeff = s * lam / dist.mean
    value = np.sum(coeff * xs ** (s - 1.0) * np.exp(-delta * (1.0 - xs ** s)), axis=-1)
    return _unwrap(x, value)


def chi_check(x: ArrayLike, delta: float, g: float, lambda_mean: float) -> ArrayLike:
    xs = np.asarray(x, dtype=float)
    return _unwrap(x, np.exp(-g * delta * lambda_mean * (1.0 - xs)))


def evolve(params: EvolutionParams) -> EvolutionResult:
    p, q = 1.0, 1.0
    trace: List[float] = []
    lam = params.lambda_mean
    for it in range(1, params.max_iters + 1):
        q = gamma_edge(p, params.delta, params.dist)
        p_next = 1.0 - chi_check(1.0 - q, params.delta, params.g, lam)
        trace.append(p_next)
        done = abs(p_next - p) < params.fp_tol
        p = p_next
        if done:
            return EvolutionResult(p_final=p, q_final=q, iters=it, p_trace=tuple(trace))
    log.debug("evolution hit max_iters=%d at delta=%s G=%s", params.max_iters, params.delta, params.g)
    return EvolutionResult(p_final=p, q_final=q, iters=params.max_iters, p_trace=tuple(trace), converged=False)


def predict(params: EvolutionParams) -> Prediction:
    res = evolve(params)
    p_coll = 1.0 - gamma_node(res.p_final, params.delta, params.dist)
    return Prediction(g=params.g, p_coll=p_coll, throughput=params.g * p_coll)


def prediction_sweep(delta: float, dist: DegreeDistribution, g_grid: Sequence[float]) -> List[Prediction]:
    return [predict(EvolutionParams(delta=delta, g=float(g), dist=dist)) for g in g_grid]


def stability_bound(delta: float, dist: DegreeDistribution) -> Flagged:
    lam1, lam2 = dist.prob(1), dist.prob(2)
    if lam2 <= 0.0:
        return Flagged(math.inf, "unbounded")
    return Flagged(math.exp(delta) / (delta * (2.0 * lam2 + delta * lam1)))


def stability_derivative(g: float, delta: float, dist: DegreeDistribution) -> float:
    """d/dq of gamma_edge(1 - exp(-G delta lambda q)) at q = 0."""
    return g * delta * math.exp(-delta) * (2.0 * dist.prob(2) + delta * dist.prob(1))


def threshold_margin(g: float, delta: float, dist: DegreeDistribution, j_grid: int = THRESHOLD_GRID_J) -> float:
    """max_q (f(G; q) - q) over q = j / J, together with the limit q -> 0+.

    f(G; 0) = gamma_edge(0) = L_1 exp(-delta) / lambda for every G, so a degree-1
    mass leaves a positive margin next to q = 0 however fine the grid is.
    """
    q = np.arange(1, j_grid + 1, dtype=float) / j_grid
    f = gamma_edge(1.0 - np.exp(-g * delta * dist.mean * q), delta, dist)
    margin = float(np.max(f - q))
    floor = gamma_edge(0.0, delta, dist)
    if floor > 0.0:
        margin = max(margin, floor)
    return margin


def _below(g: float, delta: float, dist: DegreeDistribution, j_grid: int) -> bool:
    return threshold_margin(g, delta, dist, j_grid) < -THRESHOLD_MARGIN


def threshold_estimate(
    delta: float,
    dist: DegreeDistribution,
    j_grid: int = THRESHOLD_GRID_J,
    g_hi: Optional[float] = None,
    bisect_tol: float = THRESHOLD_BISECT_TOL,
) -> Flagged:
    """Largest G keeping gamma_edge(1 - exp(-G delta lambda q)) < q on the grid q = j / J.

    The grid never reaches q -> 0, where the condition reduces to the stability
    bound, so the bisected value is capped by that bound. Any degree-1 mass
    violates the condition as q -> 0+ and returns 0 flagged violated_at_zero.
    """
    if j_grid < 100:
        raise ConfigError("invalid_threshold", f"j_grid={j_grid} must be >= 100.")
    if delta <= 0.0:
        raise ConfigError("invalid_threshold", f"delta={delta} must be > 0.")
    if not _below(0.0, delta, dist, j_grid):
        log.debug("threshold condition fails at G=0 for delta=%s", delta)
        return Flagged(0.0, "violated_at_zero")

    cap = stability_bound(delta, dist).value
    hi = g_hi if g_hi is not None else (cap * 1.05 if math.isfinite(cap) else 10.0)
    for _ in range(60):
        if not _below(hi, delta, dist, j_grid):
            break
        hi *= 2.0
    else:
        return Flagged(hi, "no_upper_bracket")

    lo = 0.0
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if _below(mid, delta, dist, j_grid):
            lo = mid
        else:
            hi = mid
    return Flagged(min(lo, cap))


def threshold_table(delta_grid: Sequence[float], dist: DegreeDistribution, j_grid: int = THRESHOLD_GRID_J) -> List[ThresholdRow]:
    rows = []
    for delta in delta_grid:
        est = threshold_estimate(float(delta), dist, j_grid=j_grid)
        rows.append(
            ThresholdRow(delta=float(delta), g_bullet=est.value, stability=stability_bound(float(delta), dist).value, flag=est.flag)
        )
    return rows


# Single base station and-or evolution.

def _node_poly(x: float, dist: DegreeDistribution) -> float:
    s, lam = _weights(dist)
    return float(np.sum(lam * x ** s))


def _edge_poly(x: float, dist: DegreeDistribution) -> float:
    s, lam = _weights(dist)
    return float(np.sum(s * lam / dist.mean * x ** (s - 1.0)))


def single_bs_rho(
    h: float,
    dist: DegreeDistribution,
    max_iters: int = EVOLUTION_MAX_ITERS,
    fp_tol: float = EVOLUTION_FP_TOL,
) -> float:
    if h < 0.0:
        raise ConfigError("invalid_load", f"H={h} must be >= 0.")
    lam = dist.mean
    p = 1.0
    for _ in range(max_iters):
        q = _edge_poly(p, dist)
        p_next = 1.0 - math.exp(-h * lam * q)
        done = abs(p_next - p) < fp_tol
        p = p_next
        if done:
            break
    return 1.0 - _node_poly(p, dist)


def single_bs_hstar(dist: DegreeDistribution, tol: float = HSTAR_TOL) -> Flagged:
    if dist.prob(1) >= 1.0:
        return Flagged(0.0, "no_sic_gain")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if single_bs_rho(mid, dist) >= 1.0 - RHO_ONE_TOL:
            lo = mid
        else:
            hi = mid
    return Flagged(lo)
