from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress
from tqdm import tqdm

from aloha.analysis import (
    AreaSamples,
    noncoop_asymptotic,
    noncoop_lower_envelope,
    spatial_upper_bound,
    temporal_lower_bound,
)
from aloha.constants import MC_TRIALS_DEFAULT
from aloha.decode import DecoderKind, decode, decode_spatial, decode_spatiotemporal
from aloha.evolution import EvolutionParams, predict
from aloha.geometry import PlacementConfig, SystemInstance, sample_instance, station_coverage
from aloha.phy import PhyConfig, calibrate_radius, sample_channel
from aloha.traffic import DegreeDistribution
from errors import ConfigError
from util import derive_rng, mean_and_stderr, stable_sum


log = logging.getLogger(__name__)

METRIC_HEADER = ("decoder", "delta", "g_realized", "p_coll", "plr", "throughput", "stderr", "trials", "seed")


@dataclass(frozen=True)
class ExperimentSpec:
    decoder: DecoderKind
    placement: PlacementConfig
    dist: DegreeDistribution
    g_grid: Tuple[float, ...]
    mc_trials: int = MC_TRIALS_DEFAULT
    master_seed: int = 0
    phy: Optional[PhyConfig] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "decoder", DecoderKind(self.decoder))
        grid = tuple(float(g) for g in self.g_grid)
        if not grid:
            raise ConfigError("invalid_grid", "Load grid is empty.")
        if any(g < 0.0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("invalid_grid", "Load grid must be nonnegative and strictly increasing.")
        object.__setattr__(self, "g_grid", grid)
        if self.mc_trials < 1:
            raise ConfigError("invalid_trials", f"mc_trials={self.mc_trials} must be >= 1.")
        if self.decoder is DecoderKind.PHY and self.phy is None:
            raise ConfigError("phy_config_required", "The PHY decoder needs a phy section.")
        if self.dist.max_degree > self.placement.tau:
            raise ConfigError(
                "degree_exceeds_frame",
                f"Largest temporal degree {self.dist.max_degree} exceeds tau={self.placement.tau}.",
            )

    def users_for(self, g: float) -> int:
        return int(round(g * self.placement.tau * self.placement.m))


@dataclass(frozen=True)
class MetricRow:
    decoder: str
    delta: float
    g: float
    p_coll: float
    plr: float
    throughput: float
    stderr: float
    trials: int
    seed: int
    n: int = 0
    g_requested: float = 0.0
    flag: Optional[str] = None

    def as_csv_row(self) -> tuple:
        return (self.decoder, self.delta, self.g, self.p_coll, self.plr, self.throughput, self.stderr, self.trials, self.seed)


def _run_trial(spec: ExperimentSpec, decoders: Tuple[DecoderKind, ...], grid_index: int, trial: int, n: int) -> Tuple[int, ...]:
    rng = derive_rng(spec.master_seed, grid_index, trial)
    inst = sample_instance(spec.placement.with_users(n), spec.dist, rng)
    r = spec.placement.r
    cov = station_coverage(inst, r)
    counts = []
    chan = None
    for kind in decoders:
        if kind is DecoderKind.PHY and chan is None:
            chan = sample_channel(inst, spec.phy, rng)
        counts.append(decode(kind, inst, r, channel=chan, phy=spec.phy, coverage=cov).collected_count)
    return tuple(counts)


def _metric(kind: DecoderKind, spec: ExperimentSpec, g_req: float, n: int, counts: Sequence[int]) -> MetricRow:
    tau, m = spec.placement.tau, spec.placement.m
    g = n / (tau * m)
    p_coll = stable_sum(counts) / (n * len(counts))
    _, stderr = mean_and_stderr([c / n for c in counts])
    return MetricRow(
        decoder=kind.value,
        delta=spec.placement.delta,
        g=g,
        p_coll=p_coll,
        plr=1.0 - p_coll,
        throughput=g * p_coll,
        stderr=stderr,
        trials=len(counts),
        seed=spec.master_seed,
        n=n,
        g_requested=g_req,
    )


def _skipped(kind: DecoderKind, spec: ExperimentSpec, g_req: float) -> MetricRow:
    log.warning("load G=%s gives no users; row skipped", g_req)
    return MetricRow(
        decoder=kind.value,
        delta=spec.placement.delta,
        g=0.0,
        p_coll=0.0,
        plr=1.0,
        throughput=0.0,
        stderr=0.0,
        trials=0,
        seed=spec.master_seed,
        g_requested=g_req,
        flag="no_users",
    )


def run_paired(
    spec: ExperimentSpec,
    decoders: Sequence[DecoderKind],
    workers: int = 1,
    progress: bool = False,
) -> Dict[DecoderKind, List[MetricRow]]:
    """Every decoder sees the same instance in each trial."""
    kinds = tuple(DecoderKind(k) for k in decoders)
    if DecoderKind.PHY in kinds and spec.phy is None:
        raise ConfigError("phy_config_required", "The PHY decoder needs a phy section.")
    out: Dict[DecoderKind, List[MetricRow]] = {k: [] for k in kinds}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for gi, g_req in enumerate(tqdm(spec.g_grid, disable=not progress, desc=kinds[0].value)):
            n = spec.users_for(g_req)
            if n == 0:
                for k in kinds:
                    out[k].append(_skipped(k, spec, g_req))
                continue
            trials = range(spec.mc_trials)
            args = ([spec] * spec.mc_trials, [kinds] * spec.mc_trials, [gi] * spec.mc_trials, trials, [n] * spec.mc_trials)
            results = list(pool.map(_run_trial, *args)) if pool else [_run_trial(*a) for a in zip(*args)]
            for idx, k in enumerate(kinds):
                row = _metric(k, spec, g_req, n, [res[idx] for res in results])
                out[k].append(row)
            log.info(
                "G=%.4f n=%d %s",
                n / (spec.placement.tau * spec.placement.m),
                n,
                " ".join(f"{k.value}={out[k][-1].p_coll:.4f}" for k in kinds),
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress: bool = False) -> List[MetricRow]:
    return run_paired(spec, [spec.decoder], workers=workers, progress=progress)[spec.decoder]


def valid_rows(rows: Iterable[MetricRow]) -> List[MetricRow]:
    return sorted((row for row in rows if row.flag is None), key=lambda row: row.g)


def metric_table(rows: Iterable[MetricRow]) -> List[tuple]:
    return [row.as_csv_row() for row in valid_rows(rows)]


def rows_from_records(records: Iterable[Mapping[str, str]]) -> List[MetricRow]:
    rows = []
    for rec in records:
        try:
            rows.append(
                MetricRow(
                    decoder=rec["decoder"],
                    delta=float(rec["delta"]),
                    g=float(rec["g_realized"]),
                    p_coll=float(rec["p_coll"]),
                    plr=float(rec["plr"]),
                    throughput=float(rec["throughput"]),
                    stderr=float(rec["stderr"]),
                    trials=int(rec["trials"]),
                    seed=int(rec["seed"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError("invalid_csv", f"Result row is malformed: {exc}") from exc
    return rows


@dataclass(frozen=True)
class MaxLoad:
    target: float
    g_max: float
    g_interp: float
    flag: Optional[str] = None


def max_load_at_plr(rows: Sequence[MetricRow], target_plr: float) -> MaxLoad:
    """Largest grid load whose PLR is within the target.

    g_interp interpolates linearly towards the next grid load, whose PLR is above target.
    """
    ordered = valid_rows(rows)
    passing = [k for k, row in enumerate(ordered) if row.plr <= target_plr]
    if not passing:
        log.warning("PLR exceeds %s at every load", target_plr)
        return MaxLoad(target=target_plr, g_max=0.0, g_interp=0.0, flag="target_missed")
    last = ordered[passing[-1]]
    nxt = ordered[passing[-1] + 1] if passing[-1] + 1 < len(ordered) else None
    interp = last.g
    if nxt is not None and nxt.plr > last.plr:
        interp = last.g + (target_plr - last.plr) * (nxt.g - last.g) / (nxt.plr - last.plr)
    return MaxLoad(target=target_plr, g_max=last.g, g_interp=interp)


def peak(rows: Sequence[MetricRow]) -> MetricRow:
    ordered = valid_rows(rows)
    if not ordered:
        raise ConfigError("empty_rows", "No valid rows to take a peak from.")
    return max(ordered, key=lambda row: row.throughput)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def linear_fit(points: Sequence[Tuple[float, float]]) -> LinearFit:
    xs, ys = zip(*points)
    res = linregress(xs, ys)
    return LinearFit(slope=float(res.slope), intercept=float(res.intercept), r_squared=float(res.rvalue ** 2))


def calibrated(spec: ExperimentSpec, m: Optional[int] = None) -> ExperimentSpec:
    """Spec for m stations whose radius comes from the PHY calibration (PHY) or keeps delta (MAC)."""
    m = spec.placement.m if m is None else m
    if spec.decoder is DecoderKind.PHY:
        phy = replace(spec.phy, m=m)
        r = calibrate_radius(phy).radius
        return replace(spec, placement=replace(spec.placement, m=m, r=r), phy=phy)
    return replace(spec, placement=PlacementConfig.from_delta(0, m, spec.placement.tau, spec.placement.delta, spec.placement.seed))


@dataclass(frozen=True)
class LinearityPoint:
    m: int
    peak_throughput: float
    unnormalized_peak: float
    r: float


def linearity_study(spec: ExperimentSpec, m_grid: Sequence[int], workers: int = 1, progress: bool = False) -> List[LinearityPoint]:
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ConfigError("invalid_grid", "m_grid must be increasing.")
    points = []
    for m in m_grid:
        sub = calibrated(spec, int(m))
        best = peak(run_experiment(sub, workers=workers, progress=progress))
        points.append(LinearityPoint(m=int(m), peak_throughput=best.throughput, unnormalized_peak=m * best.throughput, r=sub.placement.r))
        log.info("linearity m=%d peak T=%.4f", m, best.throughput)
    return points


def radius_study(spec: ExperimentSpec, radii: Sequence[float], workers: int = 1, progress: bool = False) -> Dict[float, List[MetricRow]]:
    return {
        float(r): run_experiment(replace(spec, placement=replace(spec.placement, r=float(r))), workers=workers, progress=progress)
        for r in radii
    }


# Isolated two-station cluster.

@dataclass(frozen=True)
class ClusterRow:
    tau: int
    plr_spatial: float
    plr_spatiotemporal: float
    trials: int


def cluster_layout(r: float) -> Tuple[np.ndarray, np.ndarray]:
    """Two stations and four users packed inside B(0, r/2); nothing else within 3r/2."""
    stations = np.array([[-r / 4, 0.0], [r / 4, 0.0]])
    users = np.array([[0.0, r / 4], [0.0, -r / 4], [r / 8, r / 8], [-r / 8, -r / 8]])
    return users, stations


def _cluster_instance(users, stations, tau: int, degree: int, rng: np.random.Generator) -> SystemInstance:
    acts = [tuple(sorted((rng.permutation(tau)[:degree] + 1).tolist())) for _ in range(len(users))]
    return SystemInstance(users=users, stations=stations, activations=acts, tau=tau)


def cluster_study(tau_grid: Sequence[int], trials: int, seed: int = 0, r: float = 0.1) -> List[ClusterRow]:
    users, stations = cluster_layout(r)
    rows = []
    for tau in tau_grid:
        if tau < 2:
            raise ConfigError("invalid_tau", "Degree-two activations need tau >= 2.")
        rng = derive_rng(seed, tau)
        lost_s = lost_st = 0
        for _ in range(trials):
            lost_s += len(users) - decode_spatial(_cluster_instance(users, stations, tau, 1, rng), r).collected_count
            lost_st += len(users) - decode_spatiotemporal(_cluster_instance(users, stations, tau, 2, rng), r).collected_count
        total = len(users) * trials
        rows.append(ClusterRow(tau=int(tau), plr_spatial=lost_s / total, plr_spatiotemporal=lost_st / total, trials=trials))
    return rows


# Closed-form and evolution curves.

FORMULA_HEADER = (
    "delta",
    "g",
    "noncoop_fast",
    "noncoop_accurate",
    "noncoop_envelope",
    "spatial_upper",
    "temporal_lower",
    "evolution_p_coll",
    "evolution_throughput",
    "flag",
)


def formula_rows(
    delta_grid: Sequence[float],
    g_grid: Sequence[float],
    areas: AreaSamples,
    dist: DegreeDistribution,
    eps: float = 0.01,
) -> List[tuple]:
    rows = []
    for delta in delta_grid:
        for g in g_grid:
            fast = noncoop_asymptotic(delta, g, areas, mode="fast")
            accurate = noncoop_asymptotic(delta, g, areas, mode="accurate")
            pred = predict(EvolutionParams(delta=delta, g=g, dist=dist))
            rows.append(
                (
                    float(delta),
                    float(g),
                    fast.value,
                    accurate.value,
                    noncoop_lower_envelope(delta, g),
                    spatial_upper_bound(delta, g),
                    temporal_lower_bound(delta, g, dist, eps),
                    pred.p_coll,
                    pred.throughput,
                    fast.flag or accurate.flag,
                )
            )
    return rows


def load_grid(start: float, stop: float, step: float) -> Tuple[float, ...]:
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(max(count, 0)))
