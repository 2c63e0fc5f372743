from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

from aloha.constants import G_GRID_STEP, MC_TRIALS_DEFAULT, MC_TRIALS_SPATIOTEMPORAL
from aloha.decode import DecoderKind
from aloha.geometry import PlacementConfig, radius_for_delta
from aloha.phy import PhyConfig, calibrate_radius
from aloha.traffic import DegreeDistribution, from_pairs, named_distribution, table1_distribution
from errors import ConfigError
from harness import ExperimentSpec, load_grid


log = logging.getLogger(__name__)

TOP_KEYS = {"decoder", "decoders", "placement", "distribution", "g_grid", "mc_trials", "master_seed", "phy", "output"}
PLACEMENT_KEYS = {"m", "tau", "r", "delta", "seed"}
PHY_KEYS = {"alpha", "theta", "noise", "snr_reading", "seed", "calibrate"}
GRID_KEYS = {"start", "stop", "step"}


@dataclass(frozen=True)
class ExperimentFile:
    spec: ExperimentSpec
    decoders: Tuple[DecoderKind, ...]
    output: Optional[str] = None
    grid_step: Optional[float] = None


def _reject_unknown(section: str, data: Mapping[str, Any], allowed: Iterable[str]) -> None:
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError("unknown_keys", f"Unknown key(s) in {section}: {', '.join(extra)}")


def _require_mapping(section: str, data: Any) -> Mapping[str, Any]:
    if not isinstance(data, Mapping):
        raise ConfigError("invalid_section", f"Section {section} must be an object.")
    return data


def parse_distribution(raw: Any) -> DegreeDistribution:
    if isinstance(raw, str):
        return named_distribution(raw)
    if isinstance(raw, Mapping):
        _reject_unknown("distribution", raw, {"table1"})
        if "table1" not in raw:
            raise ConfigError("invalid_distribution", "Distribution object needs a table1 key.")
        return table1_distribution(float(raw["table1"]))
    if isinstance(raw, (list, tuple)):
        return from_pairs(raw)
    raise ConfigError("invalid_distribution", f"Cannot read a distribution from {raw!r}.")


def parse_grid(raw: Any) -> Tuple[Tuple[float, ...], Optional[float]]:
    if isinstance(raw, Mapping):
        _reject_unknown("g_grid", raw, GRID_KEYS)
        try:
            start, stop = float(raw["start"]), float(raw["stop"])
        except KeyError as exc:
            raise ConfigError("invalid_grid", f"g_grid needs {exc.args[0]}.") from exc
        step = float(raw.get("step", G_GRID_STEP))
        if step <= 0.0 or stop < start:
            raise ConfigError("invalid_grid", "g_grid needs step > 0 and stop >= start.")
        return load_grid(start, stop, step), step
    if isinstance(raw, (list, tuple)):
        return tuple(float(g) for g in raw), None
    raise ConfigError("invalid_grid", f"Cannot read a load grid from {raw!r}.")


def parse_phy(raw: Mapping[str, Any], m: int) -> Tuple[PhyConfig, bool]:
    _reject_unknown("phy", raw, PHY_KEYS)
    kwargs = {k: raw[k] for k in ("alpha", "theta", "noise", "snr_reading", "seed") if k in raw}
    return PhyConfig(m=m, **kwargs), bool(raw.get("calibrate", False))


def parse_experiment(data: Mapping[str, Any]) -> ExperimentFile:
    data = _require_mapping("experiment", data)
    _reject_unknown("experiment", data, TOP_KEYS)

    raw_decoders = data.get("decoders") or [data.get("decoder", "SPATIOTEMPORAL")]
    decoders = tuple(DecoderKind.parse(str(d)) for d in raw_decoders)

    placement = _require_mapping("placement", data.get("placement", {}))
    _reject_unknown("placement", placement, PLACEMENT_KEYS)
    try:
        m, tau = int(placement["m"]), int(placement["tau"])
    except KeyError as exc:
        raise ConfigError("invalid_placement", f"placement needs {exc.args[0]}.") from exc
    seed = int(placement.get("seed", 0))

    phy = None
    calibrate = False
    if "phy" in data:
        phy, calibrate = parse_phy(_require_mapping("phy", data["phy"]), m)

    if "r" in placement and "delta" in placement:
        raise ConfigError("invalid_placement", "Give either r or delta, not both.")
    if "r" in placement:
        r = float(placement["r"])
    elif "delta" in placement:
        r = radius_for_delta(m, float(placement["delta"]))
    elif phy is not None and calibrate:
        r = calibrate_radius(phy).radius
    else:
        raise ConfigError("invalid_placement", "placement needs r or delta (or phy.calibrate).")

    grid, step = parse_grid(data.get("g_grid", {"start": G_GRID_STEP, "stop": 1.0, "step": G_GRID_STEP}))
    default_trials = MC_TRIALS_SPATIOTEMPORAL if decoders[0] is DecoderKind.SPATIOTEMPORAL else MC_TRIALS_DEFAULT
    spec = ExperimentSpec(
        decoder=decoders[0],
        placement=PlacementConfig(n=0, m=m, tau=tau, r=r, seed=seed),
        dist=parse_distribution(data.get("distribution", "CRDSA2")),
        g_grid=grid,
        mc_trials=int(data.get("mc_trials", default_trials)),
        master_seed=int(data.get("master_seed", 0)),
        phy=phy,
    )
    if DecoderKind.PHY in decoders and phy is None:
        raise ConfigError("phy_config_required", "The PHY decoder needs a phy section.")
    output = data.get("output")
    return ExperimentFile(spec=spec, decoders=decoders, output=str(output) if output else None, grid_step=step)


def load_experiment(path: Path) -> ExperimentFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError("missing_file", f"No such config file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid_json", f"{path}: {exc}") from exc
    log.info("loaded experiment config %s", path)
    return parse_experiment(data)


def describe(exp: ExperimentFile) -> Dict[str, Any]:
    spec = exp.spec
    return {
        "decoders": [d.value for d in exp.decoders],
        "m": spec.placement.m,
        "tau": spec.placement.tau,
        "r": spec.placement.r,
        "delta": spec.placement.delta,
        "distribution": list(spec.dist.probs),
        "g_grid": list(spec.g_grid),
        "g_grid_step": exp.grid_step,
        "mc_trials": spec.mc_trials,
        "master_seed": spec.master_seed,
        "phy": None if spec.phy is None else {
            "alpha": spec.phy.alpha,
            "theta": spec.phy.theta,
            "noise": spec.phy.noise,
            "snr_reading": spec.phy.snr_reading,
        },
    }
