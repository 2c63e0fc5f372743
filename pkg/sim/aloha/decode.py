from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Hashable, Iterable, Optional, Sequence, Set

import numpy as np

from aloha.geometry import (
    DecodingGraph,
    SystemInstance,
    build_g0,
    build_h0,
    build_station_graph,
    station_coverage,
)
from errors import ConfigError


log = logging.getLogger(__name__)


class DecoderKind(str, Enum):
    NONCOOP = "NONCOOP"
    SPATIAL = "SPATIAL"
    TEMPORAL = "TEMPORAL"
    SPATIOTEMPORAL = "SPATIOTEMPORAL"
    PHY = "PHY"

    @classmethod
    def parse(cls, raw: str) -> "DecoderKind":
        key = (raw or "").strip().upper().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ConfigError("unknown_decoder", f"Unknown decoder {raw!r}.")


@dataclass(frozen=True, eq=False)
class DecodeOutcome:
    collected: np.ndarray
    iterations_used: int
    per_iteration_collected: tuple

    @property
    def collected_count(self) -> int:
        return int(np.count_nonzero(self.collected))

    def collected_set(self) -> frozenset:
        return frozenset(np.flatnonzero(self.collected).tolist())


@dataclass(frozen=True)
class PeelResult:
    removed: Dict[int, int]  # variable -> 1-based sweep in which it was peeled
    sweeps: int


def peel(
    graph: DecodingGraph,
    max_sweeps: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> PeelResult:
    """Remove degree-one checks with their variable node until none remain.

    With ``rng`` set, checks are peeled one at a time in random order; each removal
    then counts as its own sweep.
    """
    remaining: Dict[Hashable, Set[int]] = {c: set(vs) for c, vs in graph.check_adj.items()}
    if rng is not None:
        return _peel_random(graph, remaining, rng)

    removed: Dict[int, int] = {}
    frontier = [c for c, vs in remaining.items() if len(vs) == 1]
    sweeps = 0
    while frontier and (max_sweeps is None or sweeps < max_sweeps):
        decoded = {next(iter(remaining[c])) for c in frontier if len(remaining[c]) == 1}
        if not decoded:
            break
        sweeps += 1
        touched: Set[Hashable] = set()
        for v in decoded:
            removed[v] = sweeps
            for c in graph.var_adj[v]:
                remaining[c].discard(v)
                touched.add(c)
        frontier = [c for c in touched if len(remaining[c]) == 1]
    return PeelResult(removed=removed, sweeps=sweeps)


def _peel_random(graph: DecodingGraph, remaining: Dict[Hashable, Set[int]], rng: np.random.Generator) -> PeelResult:
    removed: Dict[int, int] = {}
    singles = sorted((c for c, vs in remaining.items() if len(vs) == 1), key=repr)
    step = 0
    while singles:
        c = singles.pop(int(rng.integers(len(singles))))
        if len(remaining[c]) != 1:
            continue
        v = next(iter(remaining[c]))
        step += 1
        removed[v] = step
        for other in graph.var_adj[v]:
            remaining[other].discard(v)
            if len(remaining[other]) == 1:
                singles.append(other)
    return PeelResult(removed=removed, sweeps=step)


def _merge(n: int, results: Iterable[PeelResult]) -> DecodeOutcome:
    """Combine independent peelings; a user counts once, at its earliest sweep."""
    first: Dict[int, int] = {}
    sweeps = 0
    for res in results:
        sweeps = max(sweeps, res.sweeps)
        for v, s in res.removed.items():
            if v not in first or s < first[v]:
                first[v] = s
    collected = np.zeros(n, dtype=bool)
    per_iter = [0] * sweeps
    for v, s in first.items():
        collected[v] = True
        per_iter[s - 1] += 1
    collected.setflags(write=False)
    return DecodeOutcome(collected=collected, iterations_used=sweeps, per_iteration_collected=tuple(per_iter))


def decode_noncooperative(inst: SystemInstance, r: float, coverage: Optional[Sequence[Sequence[int]]] = None) -> DecodeOutcome:
    cov = coverage if coverage is not None else station_coverage(inst, r)
    h0 = build_h0(inst, r, coverage=cov)
    collected = np.zeros(inst.n, dtype=bool)
    for vs in h0.check_adj.values():
        if len(vs) == 1:
            collected[next(iter(vs))] = True
    collected.setflags(write=False)
    return DecodeOutcome(collected=collected, iterations_used=1, per_iteration_collected=(int(collected.sum()),))


def decode_spatial(inst: SystemInstance, r: float, coverage: Optional[Sequence[Sequence[int]]] = None) -> DecodeOutcome:
    cov = coverage if coverage is not None else station_coverage(inst, r)
    return _merge(
        inst.n,
        (peel(build_g0(inst, t, r, coverage=cov), max_sweeps=inst.m) for t in range(1, inst.tau + 1)),
    )


def decode_temporal(inst: SystemInstance, r: float, coverage: Optional[Sequence[Sequence[int]]] = None) -> DecodeOutcome:
    cov = coverage if coverage is not None else station_coverage(inst, r)
    return _merge(
        inst.n,
        (peel(build_station_graph(inst, l, r, coverage=cov), max_sweeps=inst.tau) for l in range(inst.m)),
    )


def decode_spatiotemporal(inst: SystemInstance, r: float, coverage: Optional[Sequence[Sequence[int]]] = None) -> DecodeOutcome:
    cov = coverage if coverage is not None else station_coverage(inst, r)
    return _merge(inst.n, [peel(build_h0(inst, r, coverage=cov), max_sweeps=inst.tau * inst.m)])


MAC_DECODERS = {
    DecoderKind.NONCOOP: decode_noncooperative,
    DecoderKind.SPATIAL: decode_spatial,
    DecoderKind.TEMPORAL: decode_temporal,
    DecoderKind.SPATIOTEMPORAL: decode_spatiotemporal,
}


def decode(kind: DecoderKind, inst: SystemInstance, r: float, channel=None, phy=None, coverage=None) -> DecodeOutcome:
    kind = DecoderKind(kind)
    if kind is DecoderKind.PHY:
        if channel is None or phy is None:
            raise ConfigError("phy_config_required", "PHY decoding needs a channel realization and a PhyConfig.")
        from aloha.phy import decode_phy_spatiotemporal

        return decode_phy_spatiotemporal(inst, channel, phy, r)
    return MAC_DECODERS[kind](inst, r, coverage=coverage)
