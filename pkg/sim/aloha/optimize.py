from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from aloha.constants import (
    FINETUNE_GRID_POINTS,
    OPT_ITERATIONS,
    OPT_J_FINAL,
    OPT_J_SEARCH,
    OPT_REJECTION_STREAK,
    OPT_RESTARTS,
    OPT_STEP_DECAY,
    OPT_STEP_SCALE,
    S_MAX_DEFAULT,
)
from aloha.evolution import threshold_estimate
from aloha.traffic import (
    TABLE1,
    DegreeDistribution,
    named_distribution,
    point_mass,
    total_variation,
    two_mass,
)
from errors import ConfigError
from util import derive_rng


log = logging.getLogger(__name__)

PARITY_REL_TOL = 0.01
PARITY_TV_TOL = 0.05


@dataclass(frozen=True)
class OptimizerConfig:
    delta: float
    s_max: int = S_MAX_DEFAULT
    iterations: int = OPT_ITERATIONS
    step_scale: float = OPT_STEP_SCALE
    restarts: int = OPT_RESTARTS
    seed: int = 0
    grid_points: int = FINETUNE_GRID_POINTS
    j_search: int = OPT_J_SEARCH
    j_final: int = OPT_J_FINAL
    workers: int = 1

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ConfigError("invalid_optimizer", f"delta={self.delta} must be > 0.")
        if self.iterations < 1 or self.restarts < 1:
            raise ConfigError("invalid_optimizer", "iterations and restarts must be >= 1.")
        if self.step_scale <= 0.0:
            raise ConfigError("invalid_optimizer", "step_scale must be > 0.")
        if self.s_max < 2:
            raise ConfigError("invalid_optimizer", "s_max must be >= 2.")


@dataclass(frozen=True)
class OptimizeResult:
    dist: DegreeDistribution
    g_star: float
    trace: Tuple[float, ...] = field(repr=False)
    restart: int = 0


@dataclass(frozen=True)
class FinetuneResult:
    lambda1: float
    g_star: float


@dataclass(frozen=True)
class Table1Row:
    delta: float
    probs: Tuple[float, ...]
    g_star: float
    published_g_star: Optional[float]
    tv_distance: Optional[float]
    parity: Optional[bool]


def project_to_simplex(v: Sequence[float]) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    x = np.maximum(v - theta, 0.0)
    return x / x.sum()


def _phi(probs: np.ndarray, delta: float, j_grid: int) -> float:
    return threshold_estimate(delta, DegreeDistribution(tuple(probs)), j_grid=j_grid).value


def _start_point(cfg: OptimizerConfig, restart: int, rng: np.random.Generator) -> np.ndarray:
    if restart == 0 and cfg.s_max >= S_MAX_DEFAULT:
        return named_distribution("IRSA", s_max=cfg.s_max).as_array()
    if restart == 1:
        return point_mass(2, s_max=cfg.s_max).as_array()
    # Any degree-1 mass scores 0, so random starts leave it empty.
    return np.concatenate(([0.0], rng.dirichlet(np.ones(cfg.s_max - 1))))


def _run_restart(cfg: OptimizerConfig, restart: int) -> Tuple[float, np.ndarray, np.ndarray, Tuple[float, ...]]:
    rng = derive_rng(cfg.seed, restart)
    x = start = _start_point(cfg, restart, rng)
    best = _phi(x, cfg.delta, cfg.j_search)
    step = cfg.step_scale / math.sqrt(cfg.s_max)
    streak = 0
    trace = [best]
    for _ in range(cfg.iterations):
        cand = project_to_simplex(x + rng.normal(0.0, step, cfg.s_max))
        val = _phi(cand, cfg.delta, cfg.j_search)
        if val > best:
            x, best, streak = cand, val, 0
        else:
            streak += 1
            if streak >= OPT_REJECTION_STREAK:
                step *= OPT_STEP_DECAY
                streak = 0
        trace.append(best)
    return best, start, x, tuple(trace)


def optimize_lambda(cfg: OptimizerConfig, progress: bool = False) -> OptimizeResult:
    restarts = range(cfg.restarts)
    if cfg.workers > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_restart, [cfg] * cfg.restarts, restarts))
    else:
        results = [_run_restart(cfg, r) for r in restarts]

    # Search values use j_search; every incumbent and start point is rescored at
    # j_final and the best of those is returned. Ties go to the incumbent of the
    # lowest restart index.
    best: Optional[Tuple[float, int, DegreeDistribution]] = None
    for restart, (_, start, probs, _) in enumerate(results):
        for cand in (probs, start):
            dist = DegreeDistribution(tuple(float(p) for p in cand))
            g_star = _phi(cand, cfg.delta, cfg.j_final)
            if best is None or g_star > best[0]:
                best = (g_star, restart, dist)
    g_star, winner, dist = best
    value, trace = results[winner][0], results[winner][3]
    log.info("optimized delta=%s: G=%.4f (search %.4f, restart %d)", cfg.delta, g_star, value, winner)
    return OptimizeResult(dist=dist, g_star=g_star, trace=trace, restart=winner)


def finetune_two_mass(delta: float, grid_points: int = FINETUNE_GRID_POINTS, j_grid: int = OPT_J_FINAL) -> FinetuneResult:
    if grid_points < 11:
        raise ConfigError("invalid_grid", f"grid_points={grid_points} must be >= 11.")
    grid = np.linspace(0.0, 1.0, grid_points)
    values = [threshold_estimate(delta, two_mass(float(l1)), j_grid=j_grid).value for l1 in grid]
    best = int(np.argmax(values))
    return FinetuneResult(lambda1=float(grid[best]), g_star=float(values[best]))


def table1_rows(delta_grid: Sequence[float], cfg: OptimizerConfig) -> List[Table1Row]:
    rows = []
    for delta in delta_grid:
        res = optimize_lambda(replace(cfg, delta=float(delta)))
        published = next((probs for key, probs in TABLE1.items() if abs(key - delta) < 1e-9), None)
        pub_g = tv = parity = None
        if published is not None:
            pub_dist = DegreeDistribution(published)
            pub_g = threshold_estimate(float(delta), pub_dist, j_grid=cfg.j_final).value
            tv = total_variation(res.dist, pub_dist)
            parity = tv <= PARITY_TV_TOL or res.g_star >= pub_g * (1.0 - PARITY_REL_TOL)
        rows.append(
            Table1Row(
                delta=float(delta),
                probs=res.dist.probs,
                g_star=res.g_star,
                published_g_star=pub_g,
                tv_distance=tv,
                parity=parity,
            )
        )
    return rows
