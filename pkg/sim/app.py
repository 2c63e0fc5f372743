from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

# Ensure `python sim/app.py` can import sibling modules and `aloha/`.
SIM_DIR = Path(__file__).resolve().parent
if str(SIM_DIR) not in sys.path:
    sys.path.insert(0, str(SIM_DIR))

from aloha.analysis import required_k_max, threshold_bounds
from aloha.constants import AREA_INNER_POINTS, AREA_SAMPLES_DEFAULT, G_GRID_STEP, OPT_ITERATIONS, OPT_RESTARTS, TARGET_PLRS
from aloha.decode import DecoderKind
from aloha.evolution import single_bs_hstar, threshold_table
from aloha.optimize import OptimizerConfig, finetune_two_mass, table1_rows
from aloha.phy import calibrate_radius
from area_cache import export_means, load_areas, load_or_sample
from errors import ConfigError, SimError
from experiment_config import describe, load_experiment, parse_distribution
from export import read_csv, write_csv
from harness import (
    FORMULA_HEADER,
    METRIC_HEADER,
    MetricRow,
    cluster_study,
    formula_rows,
    linear_fit,
    linearity_study,
    load_grid,
    max_load_at_plr,
    metric_table,
    peak,
    radius_study,
    rows_from_records,
    run_paired,
)
from runtime import RuntimeConfig, build_runtime_config, ensure_runtime_dirs


log = logging.getLogger("coopaloha")


def configure_runtime_logging(config: RuntimeConfig) -> None:
    log_path = config.paths.logs_dir / "coopaloha.log"
    log_path.parent.mkdir(parents=True, exist_ok=True)
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, config.log_level, logging.INFO))
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    have_file = any(
        isinstance(h, logging.FileHandler) and Path(h.baseFilename) == log_path for h in root_logger.handlers
    )
    if not have_file:
        handler = logging.FileHandler(log_path, encoding="utf-8")
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)
    have_stderr = any(getattr(h, "_coopaloha_stderr", False) for h in root_logger.handlers)
    if not have_stderr:
        stream = logging.StreamHandler(sys.stderr)
        stream.setFormatter(formatter)
        stream._coopaloha_stderr = True  # type: ignore[attr-defined]
        root_logger.addHandler(stream)


def _floats(raw: str) -> List[float]:
    try:
        return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError("invalid_argument", f"Expected comma-separated numbers, got {raw!r}.") from exc


def _ints(raw: str) -> List[int]:
    return [int(x) for x in _floats(raw)]


def _grid(raw: str) -> List[float]:
    if ":" in raw:
        parts = _floats(raw.replace(":", ","))
        if len(parts) not in (2, 3):
            raise ConfigError("invalid_argument", f"Grid must be start:stop[:step], got {raw!r}.")
        step = parts[2] if len(parts) == 3 else G_GRID_STEP
        return list(load_grid(parts[0], parts[1], step))
    return _floats(raw)


def _out_path(config: RuntimeConfig, given: Optional[str], default_name: str) -> Path:
    if given:
        path = Path(given)
        return path if path.is_absolute() else Path.cwd() / path
    return config.paths.exports_dir / default_name


def _summary(rows: Sequence[MetricRow]) -> Dict[str, object]:
    best = peak(rows)
    return {
        "peak_g": best.g,
        "peak_throughput": best.throughput,
        "max_load": {str(t): max_load_at_plr(rows, t).__dict__ for t in TARGET_PLRS},
    }


def cmd_simulate(args, config: RuntimeConfig) -> int:
    exp = load_experiment(Path(args.config))
    decoders = tuple(DecoderKind.parse(d) for d in args.decoders.split(",")) if args.decoders else exp.decoders
    results = run_paired(exp.spec, decoders, workers=config.workers, progress=config.progress)
    table = [row for kind in decoders for row in metric_table(results[kind])]
    meta = describe(exp)
    meta["decoders"] = [d.value for d in decoders]
    meta["skipped_loads"] = sorted({r.g_requested for rows in results.values() for r in rows if r.flag})
    meta["summary"] = {kind.value: _summary(results[kind]) for kind in decoders if metric_table(results[kind])}
    out = _out_path(config, args.out or exp.output, f"simulate_{'_'.join(d.value.lower() for d in decoders)}.csv")
    write_csv(out, METRIC_HEADER, table, meta=meta)
    print(out)
    return 0


def cmd_formulas(args, config: RuntimeConfig) -> int:
    deltas = _floats(args.delta)
    k_max = max(args.k_max, max(required_k_max(d) for d in deltas))
    areas = load_areas(Path(args.alphas)) if args.alphas else None
    if areas is None:
        areas = load_or_sample(
            config.paths.cache_dir, k_max, args.samples, seed=args.seed, workers=config.workers, progress=config.progress
        )
    rows = formula_rows(deltas, _grid(args.g_grid), areas, parse_distribution(args.dist), eps=args.eps)
    meta = {"k_max": areas.k_max, "area_samples": areas.n_samples, "seed": areas.seed, "dist": args.dist, "eps": args.eps}
    print(write_csv(_out_path(config, args.out, "formulas.csv"), FORMULA_HEADER, rows, meta=meta))
    return 0


def cmd_alphas(args, config: RuntimeConfig) -> int:
    areas = load_or_sample(
        config.paths.cache_dir,
        args.k_max,
        args.samples,
        seed=args.seed,
        inner_points=args.inner_points,
        method=args.method,
        workers=config.workers,
        progress=config.progress,
    )
    print(export_means(_out_path(config, args.out, f"alphas_k{args.k_max}.csv"), areas))
    return 0


def cmd_threshold(args, config: RuntimeConfig) -> int:
    dist = parse_distribution(args.dist)
    hstar = single_bs_hstar(dist)
    rows = []
    for row in threshold_table(_floats(args.delta), dist):
        bounds = threshold_bounds(row.delta, dist, hstar=hstar.value)
        rows.append((row.delta, row.g_bullet, row.stability, hstar.value, bounds.temporal_lb, row.flag or hstar.flag))
    header = ("delta", "g_bullet", "stability_bound", "hstar", "temporal_lb", "flag")
    print(write_csv(_out_path(config, args.out, f"threshold_{args.dist.lower()}.csv"), header, rows, meta={"dist": args.dist}))
    return 0


def cmd_optimize(args, config: RuntimeConfig) -> int:
    deltas = _floats(args.delta)
    cfg = OptimizerConfig(
        delta=deltas[0], iterations=args.iterations, restarts=args.restarts, seed=args.seed, workers=config.workers
    )
    out = _out_path(config, args.out, "optimize.csv")
    if args.finetune:
        rows = [(d, ft.lambda1, ft.g_star) for d in deltas for ft in [finetune_two_mass(d, cfg.grid_points)]]
        print(write_csv(out, ("delta", "lambda1", "g_star"), rows, meta={"grid_points": cfg.grid_points}))
        return 0
    header = ("delta",) + tuple(f"L{s}" for s in range(1, cfg.s_max + 1)) + ("g_star", "published_g_star", "tv", "parity")
    rows = [
        (row.delta, *row.probs, row.g_star, row.published_g_star, row.tv_distance, row.parity)
        for row in table1_rows(deltas, cfg)
    ]
    meta = {"iterations": cfg.iterations, "restarts": cfg.restarts, "seed": cfg.seed, "j_final": cfg.j_final}
    print(write_csv(out, header, rows, meta=meta))
    return 0


def cmd_physim(args, config: RuntimeConfig) -> int:
    exp = load_experiment(Path(args.config))
    spec = exp.spec
    if spec.phy is None:
        raise ConfigError("phy_config_required", "physim needs a phy section.")
    spec = replace(spec, decoder=DecoderKind.PHY)
    meta = describe(exp)
    if args.calibrate:
        cal = calibrate_radius(spec.phy)
        spec = replace(spec, placement=replace(spec.placement, r=cal.radius))
        meta["calibration"] = cal.__dict__
        print(f"calibrated r={cal.radius:.4f} (mean SNR {cal.snr_mean:.4f} +- {cal.snr_stderr:.4f})")
    if args.linearity:
        points = linearity_study(spec, _ints(args.linearity), workers=config.workers, progress=config.progress)
        fit = linear_fit([(p.m, p.unnormalized_peak) for p in points])
        meta["fit"] = fit.__dict__
        rows = [(p.m, p.peak_throughput, p.unnormalized_peak, p.r) for p in points]
        print(write_csv(_out_path(config, args.out, "physim_linearity.csv"), ("m", "peak_throughput", "unnormalized_peak", "r"), rows, meta=meta))
        return 0
    if args.radii:
        radii = _floats(args.radii)
        study = radius_study(spec, radii, workers=config.workers, progress=config.progress)
        rows = [(r,) + row for r in radii for row in metric_table(study[r])]
        print(write_csv(_out_path(config, args.out, "physim_radii.csv"), ("r",) + METRIC_HEADER, rows, meta=meta))
        return 0
    rows = run_paired(spec, [DecoderKind.PHY], workers=config.workers, progress=config.progress)[DecoderKind.PHY]
    meta["r"] = spec.placement.r
    meta["summary"] = _summary(rows)
    print(write_csv(_out_path(config, args.out or exp.output, "physim.csv"), METRIC_HEADER, metric_table(rows), meta=meta))
    return 0


def cmd_cluster(args, config: RuntimeConfig) -> int:
    rows = [(r.tau, r.plr_spatial, r.plr_spatiotemporal, r.trials) for r in cluster_study(_ints(args.tau_grid), args.trials, args.seed, args.r)]
    header = ("tau", "plr_spatial", "plr_spatiotemporal", "trials")
    print(write_csv(_out_path(config, args.out, "cluster.csv"), header, rows, meta={"r": args.r, "seed": args.seed}))
    return 0


def cmd_max_load(args, config: RuntimeConfig) -> int:
    rows = rows_from_records(read_csv(Path(args.csv)))
    by_decoder: Dict[str, List[MetricRow]] = {}
    for row in rows:
        by_decoder.setdefault(row.decoder, []).append(row)
    out_rows = []
    for decoder, subset in by_decoder.items():
        for target in _floats(args.targets):
            res = max_load_at_plr(subset, target)
            out_rows.append((decoder, target, res.g_max, res.g_interp, res.flag))
            print(f"{decoder:16s} PLR<={target:<6g} G={res.g_max:.4f} (interp {res.g_interp:.4f}){' ' + res.flag if res.flag else ''}")
    if args.out:
        write_csv(_out_path(config, args.out, "max_load.csv"), ("decoder", "target_plr", "g_max", "g_interp", "flag"), out_rows)
    return 0


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with 1, like every other failure of the CLI."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(description="Cooperative framed slotted Aloha simulator and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo decoding experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--decoders", default="")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("formulas", help="closed-form and evolution curves over a (delta, G) grid")
    p.add_argument("--delta", required=True)
    p.add_argument("--g-grid", default=f"0:1:{G_GRID_STEP}")
    p.add_argument("--dist", default="CRDSA2")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--samples", type=int, default=AREA_SAMPLES_DEFAULT)
    p.add_argument("--alphas", default="", help="cached area samples (.npz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_formulas)

    p = sub.add_parser("alphas", help="sample and cache union-area variables")
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--samples", type=int, default=AREA_SAMPLES_DEFAULT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inner-points", type=int, default=AREA_INNER_POINTS)
    p.add_argument("--method", choices=("hit_or_miss", "polygon"), default="hit_or_miss")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_alphas)

    p = sub.add_parser("threshold", help="evolution threshold, stability bound and single-station H*")
    p.add_argument("--delta", required=True)
    p.add_argument("--dist", default="CRDSA2")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("optimize", help="degree distribution search")
    p.add_argument("--delta", required=True)
    p.add_argument("--iterations", type=int, default=OPT_ITERATIONS)
    p.add_argument("--restarts", type=int, default=OPT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--finetune", action="store_true")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("physim", help="SINR physical-layer experiments")
    p.add_argument("--config", required=True)
    p.add_argument("--calibrate", action="store_true")
    p.add_argument("--linearity", default="")
    p.add_argument("--radii", default="")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_physim)

    p = sub.add_parser("cluster", help="isolated two-station cluster PLR versus tau")
    p.add_argument("--tau-grid", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("max-load", help="maximal loads at target PLRs from a result CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--targets", default=",".join(str(t) for t in TARGET_PLRS))
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_max_load)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = build_runtime_config()
    try:
        ensure_runtime_dirs(config)
        configure_runtime_logging(config)
        return int(args.func(args, config))
    except SimError as exc:
        log.error("%s: %s", exc.code, exc.message)
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
