from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Hashable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from aloha.constants import DOMAIN_DIAMETER
from aloha.traffic import DegreeDistribution, sample_degrees
from errors import ConfigError
from util import derive_rng


log = logging.getLogger(__name__)

KDTREE_MIN_PAIRS = 200_000


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)

    def distance(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class PlacementConfig:
    n: int
    m: int
    tau: int
    r: float
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.n) < 0:
            raise ConfigError("invalid_placement", f"n={self.n} must be >= 0.")
        if int(self.m) < 1:
            raise ConfigError("invalid_placement", f"m={self.m} must be >= 1.")
        if int(self.tau) < 1:
            raise ConfigError("invalid_placement", f"tau={self.tau} must be >= 1.")
        if not (0.0 < float(self.r) <= DOMAIN_DIAMETER):
            raise ConfigError("invalid_placement", f"r={self.r} must lie in (0, sqrt(2)].")

    @classmethod
    def from_delta(cls, n: int, m: int, tau: int, delta: float, seed: int = 0) -> "PlacementConfig":
        return cls(n=n, m=m, tau=tau, r=radius_for_delta(m, delta), seed=seed)

    @property
    def delta(self) -> float:
        return self.m * self.r * self.r * math.pi

    @property
    def load(self) -> float:
        return self.n / (self.tau * self.m)

    def with_users(self, n: int) -> "PlacementConfig":
        return PlacementConfig(n=n, m=self.m, tau=self.tau, r=self.r, seed=self.seed)


def radius_for_delta(m: int, delta: float) -> float:
    if delta <= 0.0:
        raise ConfigError("invalid_placement", f"delta={delta} must be > 0.")
    return math.sqrt(delta / (m * math.pi))


def _frozen_points(points) -> np.ndarray:
    if not isinstance(points, np.ndarray):
        points = [p.as_tuple() if isinstance(p, Point) else tuple(p) for p in points]
    arr = np.array(points, dtype=float).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemInstance:
    """One frame: user and station positions plus each user's 1-based activation slots."""

    users: np.ndarray
    stations: np.ndarray
    activations: Tuple[Tuple[int, ...], ...]
    tau: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", _frozen_points(self.users))
        object.__setattr__(self, "stations", _frozen_points(self.stations))
        acts = tuple(tuple(sorted(int(t) for t in slots)) for slots in self.activations)
        if len(acts) != self.users.shape[0]:
            raise ConfigError("invalid_instance", f"{len(acts)} activation sets for {self.users.shape[0]} users.")
        for i, slots in enumerate(acts):
            if not slots:
                raise ConfigError("invalid_instance", f"User {i} has no activation slot.")
            if len(set(slots)) != len(slots):
                raise ConfigError("invalid_instance", f"User {i} repeats a slot: {slots}.")
            if slots[0] < 1 or slots[-1] > self.tau:
                raise ConfigError("invalid_instance", f"User {i} slots {slots} fall outside 1..{self.tau}.")
        object.__setattr__(self, "activations", acts)

    @property
    def n(self) -> int:
        return int(self.users.shape[0])

    @property
    def m(self) -> int:
        return int(self.stations.shape[0])

    def temporal_degrees(self) -> np.ndarray:
        return np.asarray([len(s) for s in self.activations], dtype=int)

    def active_users(self, slot: int) -> Tuple[int, ...]:
        return tuple(i for i, slots in enumerate(self.activations) if slot in slots)

    def activity_matrix(self) -> np.ndarray:
        """(n, tau) boolean; column t-1 marks users active at slot t."""
        mat = np.zeros((self.n, self.tau), dtype=bool)
        for i, slots in enumerate(self.activations):
            mat[i, [t - 1 for t in slots]] = True
        return mat


def sample_instance(
    cfg: PlacementConfig,
    dist: DegreeDistribution,
    rng: Optional[np.random.Generator] = None,
) -> SystemInstance:
    if dist.max_degree > cfg.tau:
        raise ConfigError(
            "degree_exceeds_frame",
            f"Largest temporal degree {dist.max_degree} exceeds tau={cfg.tau}.",
        )
    rng = rng if rng is not None else derive_rng(cfg.seed)
    stations = rng.uniform(-0.5, 0.5, size=(cfg.m, 2))
    users = rng.uniform(-0.5, 0.5, size=(cfg.n, 2))
    degrees = sample_degrees(dist, rng, cfg.n)
    activations: Tuple[Tuple[int, ...], ...] = ()
    if cfg.n:
        # Row-wise random permutation of the slots; the first q_i entries are distinct.
        order = np.argsort(rng.random((cfg.n, cfg.tau)), axis=1) + 1
        activations = tuple(tuple(sorted(order[i, : degrees[i]].tolist())) for i in range(cfg.n))
    return SystemInstance(users=users, stations=stations, activations=activations, tau=cfg.tau)


def coverage_matrix(inst: SystemInstance, r: float) -> np.ndarray:
    """(n, m) boolean; True where user i is within distance r of station l."""
    if inst.n == 0:
        return np.zeros((0, inst.m), dtype=bool)
    return cdist(inst.users, inst.stations) <= r


def station_coverage(inst: SystemInstance, r: float, method: str = "auto") -> Tuple[Tuple[int, ...], ...]:
    if method == "auto":
        method = "kdtree" if inst.n * inst.m >= KDTREE_MIN_PAIRS else "brute"
    if method == "brute":
        cov = coverage_matrix(inst, r)
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in cov)
    if method == "kdtree":
        if inst.n == 0:
            return ()
        tree = cKDTree(inst.stations)
        hits = tree.query_ball_point(inst.users, r)
        return tuple(tuple(sorted(h)) for h in hits)
    raise ConfigError("invalid_method", f"Unknown coverage method {method!r}.")


def spatial_degree(inst: SystemInstance, user: int, r: float) -> int:
    d = np.hypot(inst.stations[:, 0] - inst.users[user, 0], inst.stations[:, 1] - inst.users[user, 1])
    return int(np.count_nonzero(d <= r))


def nominal_mask(points: np.ndarray, r: float) -> np.ndarray:
    """Points whose r-disk cannot reach past the boundary band: inner square of side 1 - 4r."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    half = 0.5 - 2.0 * r
    if half <= 0.0:
        return np.zeros(pts.shape[0], dtype=bool)
    return np.all(np.abs(pts) <= half, axis=1)


def coverage_probability(m: int, r: float) -> float:
    return 1.0 - (1.0 - r * r * math.pi) ** m


def asymptotic_coverage(delta: float) -> float:
    return -math.expm1(-delta)


def min_delta_for_coverage(eps: float) -> float:
    """Smallest delta giving asymptotic coverage 1 - eps."""
    if not (0.0 < eps < 1.0):
        raise ConfigError("invalid_epsilon", f"eps={eps} must lie in (0, 1).")
    return math.log(1.0 / eps)


class GraphKind(str, Enum):
    SPATIAL_SLOT = "spatial_slot"
    STATION_TEMPORAL = "station_temporal"
    SPATIO_TEMPORAL = "spatio_temporal"


@dataclass(frozen=True, eq=False)
class DecodingGraph:
    kind: GraphKind
    var_adj: Dict[int, FrozenSet[Hashable]] = field(default_factory=dict)
    check_adj: Dict[Hashable, FrozenSet[int]] = field(default_factory=dict)

    @property
    def variables(self) -> Tuple[int, ...]:
        return tuple(self.var_adj)

    @property
    def checks(self) -> Tuple[Hashable, ...]:
        return tuple(self.check_adj)

    def variable_degree(self, v: int) -> int:
        return len(self.var_adj[v])

    def edge_count(self) -> int:
        return sum(len(cs) for cs in self.var_adj.values())

    def is_symmetric(self) -> bool:
        for v, cs in self.var_adj.items():
            if any(v not in self.check_adj.get(c, ()) for c in cs):
                return False
        for c, vs in self.check_adj.items():
            if any(c not in self.var_adj.get(v, ()) for v in vs):
                return False
        return True


def _graph_from_edges(
    kind: GraphKind,
    variables: Iterable[int],
    checks: Iterable[Hashable],
    edges: Iterable[Tuple[int, Hashable]],
) -> DecodingGraph:
    var_sets: Dict[int, set] = {v: set() for v in variables}
    check_sets: Dict[Hashable, set] = {c: set() for c in checks}
    for v, c in edges:
        var_sets[v].add(c)
        check_sets[c].add(v)
    return DecodingGraph(
        kind=kind,
        var_adj={v: frozenset(cs) for v, cs in var_sets.items()},
        check_adj={c: frozenset(vs) for c, vs in check_sets.items()},
    )


def _coverage_lists(inst: SystemInstance, r: float, coverage: Optional[Sequence[Sequence[int]]]) -> Sequence[Sequence[int]]:
    return coverage if coverage is not None else station_coverage(inst, r)


def build_g0(
    inst: SystemInstance,
    slot: int,
    r: float,
    coverage: Optional[Sequence[Sequence[int]]] = None,
) -> DecodingGraph:
    if not 1 <= slot <= inst.tau:
        raise ConfigError("invalid_slot", f"slot={slot} outside 1..{inst.tau}.")
    cov = _coverage_lists(inst, r, coverage)
    active = inst.active_users(slot)
    return _graph_from_edges(
        GraphKind.SPATIAL_SLOT,
        active,
        range(inst.m),
        ((i, l) for i in active for l in cov[i]),
    )


def build_station_graph(
    inst: SystemInstance,
    station: int,
    r: float,
    coverage: Optional[Sequence[Sequence[int]]] = None,
) -> DecodingGraph:
    """Single-station temporal graph: covered users against that station's tau slots."""
    cov = _coverage_lists(inst, r, coverage)
    covered = [i for i in range(inst.n) if station in cov[i]]
    return _graph_from_edges(
        GraphKind.STATION_TEMPORAL,
        covered,
        range(1, inst.tau + 1),
        ((i, t) for i in covered for t in inst.activations[i]),
    )


def build_h0(
    inst: SystemInstance,
    r: float,
    coverage: Optional[Sequence[Sequence[int]]] = None,
) -> DecodingGraph:
    cov = _coverage_lists(inst, r, coverage)
    checks = [(l, t) for l in range(inst.m) for t in range(1, inst.tau + 1)]
    return _graph_from_edges(
        GraphKind.SPATIO_TEMPORAL,
        range(inst.n),
        checks,
        ((i, (l, t)) for i in range(inst.n) for l in cov[i] for t in inst.activations[i]),
    )
