from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp
from shapely.geometry import Point as ShapelyPoint
from shapely.ops import unary_union
from tqdm import tqdm

from aloha.constants import (
    AREA_CHUNK,
    AREA_INNER_POINTS,
    EPS_COVERAGE_MAX,
    EXACT_FORMULA_MAX_R,
    KMAX_PER_DELTA,
    UNIT_DISK_RADIUS,
)
from aloha.evolution import single_bs_hstar, single_bs_rho
from aloha.geometry import PlacementConfig
from aloha.records import Flagged
from aloha.traffic import DegreeDistribution
from errors import ConfigError, InsufficientAreaSamples
from util import derive_rng, stable_sum


log = logging.getLogger(__name__)

RANGE_SLACK = 1e-6
AREA_METHODS = ("hit_or_miss", "polygon")
POLYGON_QUAD_SEGS = 64


@dataclass(frozen=True, eq=False)
class AreaSamples:
    """Union areas of k unit-area disks; row k-1 of ``samples`` holds the draws for k."""

    samples: np.ndarray
    seed: int = 0
    inner_points: int = AREA_INNER_POINTS
    method: str = "hit_or_miss"

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float, ndmin=2)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def k_max(self) -> int:
        return int(self.samples.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])

    @property
    def means(self) -> np.ndarray:
        return self.samples.mean(axis=1)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_samples < 2:
            return np.zeros(self.k_max)
        return self.samples.std(axis=1, ddof=1) / math.sqrt(self.n_samples)

    def sample(self, k: int) -> np.ndarray:
        return self.samples[k - 1]

    def mean(self, k: int) -> float:
        return float(self.samples[k - 1].mean())


def _uniform_in_disk(rng: np.random.Generator, radius: float, shape: tuple) -> np.ndarray:
    rad = radius * np.sqrt(rng.random(shape))
    ang = 2.0 * math.pi * rng.random(shape)
    return np.stack((rad * np.cos(ang), rad * np.sin(ang)), axis=-1)


def _hit_or_miss_chunk(seed: int, chunk: int, size: int, k_max: int, inner_points: int) -> np.ndarray:
    """Nested unions per sample; every k reuses the same centres and the same probe points.

    Probes are uniform on the disk of radius 2*rho that contains every union. Those
    outside disk 1 sample a region of area exactly 3, hence alpha = 1 + 3 * hit fraction.
    """
    rng = derive_rng(seed, chunk)
    rho = UNIT_DISK_RADIUS
    centers = _uniform_in_disk(rng, rho, (size, k_max))
    probes = _uniform_in_disk(rng, 2.0 * rho, (size, inner_points))
    rho2 = rho * rho

    def inside(k: int) -> np.ndarray:
        diff = probes - centers[:, k, None, :]
        return np.einsum("ijk,ijk->ij", diff, diff) <= rho2

    outside_first = ~inside(0)
    denom = np.maximum(outside_first.sum(axis=1), 1)
    covered = np.zeros_like(outside_first)
    out = np.ones((k_max, size))
    for k in range(1, k_max):
        covered |= inside(k) & outside_first
        out[k] = 1.0 + 3.0 * covered.sum(axis=1) / denom
    return out


def _polygon_chunk(seed: int, chunk: int, size: int, k_max: int, quad_segs: int) -> np.ndarray:
    rng = derive_rng(seed, chunk)
    rho = UNIT_DISK_RADIUS
    centers = _uniform_in_disk(rng, rho, (size, k_max))
    out = np.ones((k_max, size))
    for i in range(size):
        disks = [ShapelyPoint(float(x), float(y)).buffer(rho, quad_segs) for x, y in centers[i]]
        unit = disks[0].area
        union = disks[0]
        for k in range(1, k_max):
            union = unary_union([union, disks[k]])
            out[k, i] = min(4.0, max(1.0, union.area / unit))
    return out


def sample_alphas(
    k_max: int,
    n_samples: int,
    seed: int = 0,
    inner_points: int = AREA_INNER_POINTS,
    method: str = "hit_or_miss",
    chunk_size: int = AREA_CHUNK,
    workers: int = 1,
    progress: bool = False,
) -> AreaSamples:
    if k_max < 1 or n_samples < 1:
        raise ConfigError("invalid_area_request", f"k_max={k_max} and n_samples={n_samples} must be >= 1.")
    if method not in AREA_METHODS:
        raise ConfigError("invalid_method", f"Unknown area method {method!r}.")
    worker = _hit_or_miss_chunk if method == "hit_or_miss" else _polygon_chunk
    sizes = [min(chunk_size, n_samples - start) for start in range(0, n_samples, chunk_size)]
    budget = inner_points if method == "hit_or_miss" else POLYGON_QUAD_SEGS
    jobs = [(seed, idx, size, k_max, budget) for idx, size in enumerate(sizes)]
    log.info("sampling union areas k_max=%d n=%d method=%s chunks=%d", k_max, n_samples, method, len(jobs))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(tqdm(pool.map(worker, *zip(*jobs)), total=len(jobs), disable=not progress, desc="alphas"))
    else:
        parts = [worker(*job) for job in tqdm(jobs, disable=not progress, desc="alphas")]
    return AreaSamples(samples=np.concatenate(parts, axis=1), seed=seed, inner_points=inner_points, method=method)


def union_area_grid(centers: Sequence[Sequence[float]], resolution: int = 1000, radius: float = UNIT_DISK_RADIUS) -> float:
    """Union area of equal disks by counting cell midpoints of a regular grid."""
    pts = np.asarray(centers, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return 0.0
    lo = pts.min(axis=0) - radius
    hi = pts.max(axis=0) + radius
    h = 1.0 / resolution
    xs = np.arange(lo[0] + h / 2, hi[0], h)
    ys = np.arange(lo[1] + h / 2, hi[1], h)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    hit = np.zeros(gx.shape, dtype=bool)
    r2 = radius * radius
    for cx, cy in pts:
        hit |= (gx - cx) ** 2 + (gy - cy) ** 2 <= r2
    return float(np.count_nonzero(hit)) * h * h


# Non-cooperative decoding probability.

def zeta_coefficients(m: int, r: float) -> np.ndarray:
    """zeta_k = sum_{d >= k} C(d, k) Delta_d for k = 1..m, Delta_d the Binomial(m, r^2 pi) law."""
    p = r * r * math.pi
    if not (0.0 < p < 1.0):
        raise ConfigError("invalid_radius", f"r^2*pi={p} must lie in (0, 1).")
    d = np.arange(0, m + 1, dtype=float)
    log_delta = gammaln(m + 1) - gammaln(d + 1) - gammaln(m - d + 1) + d * math.log(p) + (m - d) * math.log1p(-p)
    out = np.empty(m)
    for k in range(1, m + 1):
        dd = d[k:]
        log_choose = gammaln(dd + 1) - gammaln(k + 1) - gammaln(dd - k + 1)
        out[k - 1] = math.exp(logsumexp(log_choose + log_delta[k:]))
    return out


@dataclass(frozen=True)
class NoncoopExact:
    p_nominal: float
    lower: float
    upper: float
    terms: int
    flag: Optional[str] = None


def _range_flag(value: float) -> Optional[str]:
    if value < -RANGE_SLACK or value > 1.0 + RANGE_SLACK:
        log.warning("alternating sum left [0, 1]: %r", value)
        return "out_of_range"
    return None


def noncoop_exact(cfg: PlacementConfig, areas: AreaSamples, k_trunc: Optional[int] = None) -> NoncoopExact:
    """Finite-n collection probability of an active nominal user (single-slot activations)."""
    if cfg.r > EXACT_FORMULA_MAX_R:
        raise ConfigError("radius_too_large", f"r={cfg.r} exceeds {EXACT_FORMULA_MAX_R} for the exact formula.")
    k_use = cfg.m if k_trunc is None else min(int(k_trunc), cfg.m)
    if areas.k_max < k_use:
        raise InsufficientAreaSamples(areas.k_max, k_use)
    zeta = zeta_coefficients(cfg.m, cfg.r)
    base = cfg.r * cfg.r * math.pi / cfg.tau
    terms = []
    for k in range(1, k_use + 1):
        integral = float(np.mean((1.0 - base * areas.sample(k)) ** max(cfg.n - 1, 0)))
        terms.append((-1.0) ** (k - 1) * zeta[k - 1] * integral)
    p = stable_sum(terms)
    shrink = (1.0 - 4.0 * cfg.r) ** 2
    return NoncoopExact(
        p_nominal=p,
        lower=p * shrink,
        upper=p * shrink + 8.0 * cfg.r - 16.0 * cfg.r * cfg.r,
        terms=k_use,
        flag=_range_flag(p),
    )


def required_k_max(delta: float) -> int:
    return max(1, math.ceil(KMAX_PER_DELTA * delta))


def _poisson_weights(delta: float, k_max: int) -> np.ndarray:
    k = np.arange(1, k_max + 1, dtype=float)
    return np.exp(k * math.log(delta) - gammaln(k + 1))


def noncoop_asymptotic(delta: float, g: float, areas: AreaSamples, mode: str = "fast") -> Flagged:
    if delta <= 0.0 or g < 0.0:
        raise ConfigError("invalid_load", f"delta={delta} and G={g} must satisfy delta > 0, G >= 0.")
    need = required_k_max(delta)
    if areas.k_max < need:
        raise InsufficientAreaSamples(areas.k_max, need)
    weights = _poisson_weights(delta, areas.k_max)
    if mode == "fast":
        integrals = np.exp(-areas.means * delta * g)
    elif mode == "accurate":
        integrals = np.exp(-areas.samples * delta * g).mean(axis=1)
    else:
        raise ConfigError("invalid_mode", f"Unknown formula mode {mode!r}.")
    signs = np.where(np.arange(areas.k_max) % 2 == 0, 1.0, -1.0)
    value = stable_sum((signs * weights * integrals).tolist())
    return Flagged(value, _range_flag(value))


def noncoop_lower_envelope(delta: float, g: float) -> float:
    return -math.expm1(-delta) * math.exp(-delta * g)


def noncoop_slope_at_zero(delta: float, areas: AreaSamples) -> float:
    """Magnitude of the decay of the asymptotic probability at G = 0 (diagnostic only)."""
    weights = _poisson_weights(delta, areas.k_max)
    signs = np.where(np.arange(areas.k_max) % 2 == 0, 1.0, -1.0)
    return delta * stable_sum((signs * weights * areas.means).tolist())


# Spatial cooperation.

def spatial_upper_bound(delta: float, g: float) -> float:
    return -math.expm1(-delta) + math.expm1(-delta / 4.0) * math.exp(-2.0 * delta) * -math.expm1(-g * delta / 4.0)


def spatial_slope_at_zero(delta: float) -> float:
    return 0.25 * delta * math.exp(-2.0 * delta) * -math.expm1(-delta / 4.0)


def spatial_upper_bound_finite(n: int, m: int, tau: int, r: float) -> float:
    a = r * r * math.pi
    p1 = (1.0 - a) ** m
    p2 = (
        (1.0 - (1.0 - a / (4.0 * tau)) ** max(n - 1, 0))
        * (1.0 - (1.0 - a / (4.0 * (1.0 - 2.0 * a))) ** m)
        * (1.0 - 2.0 * a) ** m
    )
    return 1.0 - p1 - p2


# Temporal cooperation.

def temporal_lower_bound(delta: float, g: float, dist: DegreeDistribution, eps: float) -> float:
    if eps <= 0.0:
        raise ConfigError("invalid_epsilon", f"eps={eps} must be > 0.")
    return -math.expm1(-delta) * single_bs_rho((1.0 + eps) * 4.0 * delta * g, dist)


@dataclass(frozen=True)
class ThresholdBounds:
    temporal_lb: float
    noncoop: float = 0.0
    spatial: float = 0.0
    hstar: float = 0.0
    flag: Optional[str] = None


def threshold_bounds(delta: float, dist: DegreeDistribution, hstar: Optional[float] = None) -> ThresholdBounds:
    if delta <= 0.0:
        raise ConfigError("invalid_delta", f"delta={delta} must be > 0.")
    flag = None
    if hstar is None:
        est = single_bs_hstar(dist)
        hstar, flag = est.value, est.flag
    return ThresholdBounds(temporal_lb=hstar / (4.0 * delta), hstar=hstar, flag=flag)


@dataclass(frozen=True)
class PeakBounds:
    eps: float
    noncoop_lb: float
    temporal_lb: float


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < EPS_COVERAGE_MAX):
        raise ConfigError("invalid_epsilon", f"eps={eps} must lie in (0, {EPS_COVERAGE_MAX}).")


def peak_throughput_bounds(eps: float, hstar: float = 0.0) -> PeakBounds:
    _check_eps(eps)
    ratio = (1.0 - eps) / math.log(1.0 / eps)
    return PeakBounds(eps=eps, noncoop_lb=ratio / math.e, temporal_lb=0.25 * hstar * ratio)


def noncoop_peak_lower_bound(delta: float) -> float:
    return -math.expm1(-delta) / (delta * math.e)


def temporal_peak_lower_bound(delta: float, hstar: float) -> float:
    return hstar * -math.expm1(-delta) / (4.0 * delta)


def single_bs_aloha_throughput(h: float) -> float:
    return h * math.exp(-h)
