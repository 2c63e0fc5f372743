"""Long-running checks against published operating points.

Deselected by default; run with ``pytest -m slow``.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from aloha.analysis import noncoop_asymptotic, noncoop_exact, required_k_max, sample_alphas
from aloha.decode import DecoderKind, decode
from aloha.evolution import threshold_estimate
from aloha.geometry import PlacementConfig, nominal_mask, sample_instance
from aloha.optimize import OptimizerConfig, finetune_two_mass, optimize_lambda
from aloha.phy import PhyConfig, calibrate_radius
from aloha.traffic import named_distribution, point_mass, table1_distribution, total_variation
from harness import (
    ExperimentSpec,
    calibrated,
    linear_fit,
    linearity_study,
    load_grid,
    max_load_at_plr,
    peak,
    run_experiment,
    run_paired,
)
from util import derive_rng


pytestmark = pytest.mark.slow

CRDSA2 = named_distribution("CRDSA2")
IRSA = named_distribution("IRSA")


def _mac(dist, delta: float, grid, trials: int, seed: int) -> ExperimentSpec:
    return ExperimentSpec(
        decoder=DecoderKind.SPATIOTEMPORAL,
        placement=PlacementConfig.from_delta(0, 40, 40, delta),
        dist=dist,
        g_grid=grid,
        mc_trials=trials,
        master_seed=seed,
    )


def _phy(dist, grid, trials: int, seed: int) -> ExperimentSpec:
    spec = ExperimentSpec(
        decoder=DecoderKind.PHY,
        placement=PlacementConfig(n=0, m=40, tau=20, r=0.39),
        dist=dist,
        g_grid=grid,
        mc_trials=trials,
        master_seed=seed,
        phy=PhyConfig(m=40),
    )
    return calibrated(spec)


def test_single_station_peak_is_one_over_e():
    spec = ExperimentSpec(
        decoder=DecoderKind.NONCOOP,
        placement=PlacementConfig(n=0, m=1, tau=100, r=math.sqrt(2.0)),
        dist=named_distribution("ALOHA"),
        g_grid=(0.8, 0.9, 1.0, 1.1, 1.2),
        mc_trials=200,
        master_seed=1,
    )
    best = peak(run_experiment(spec))
    assert best.throughput == pytest.approx(1.0 / math.e, abs=0.02)
    assert best.g == pytest.approx(1.0, abs=0.1)


def test_noncoop_simulation_follows_formulas():
    delta, m, tau = 2.0, 40, 40
    aloha = named_distribution("ALOHA")
    areas = sample_alphas(required_k_max(delta), 2000, seed=3, inner_points=1024)
    for gi, g in enumerate(load_grid(0.05, 1.0, 0.05)):
        cfg = PlacementConfig.from_delta(int(round(g * tau * m)), m, tau, delta)
        overall, nominal = [], []
        for trial in range(20):
            inst = sample_instance(cfg, aloha, derive_rng(21, gi, trial))
            got = np.zeros(inst.n, dtype=bool)
            got[sorted(decode(DecoderKind.NONCOOP, inst, cfg.r).collected_set())] = True
            overall.append(got.mean())
            nominal.append(got[nominal_mask(inst.users, cfg.r)].mean())
        se = np.std(nominal, ddof=1) / math.sqrt(len(nominal))
        asymptotic = noncoop_asymptotic(delta, g, areas, mode="accurate").value
        assert np.mean(nominal) == pytest.approx(asymptotic, abs=3 * se + 0.03)
        exact = noncoop_exact(cfg, areas, k_trunc=areas.k_max)
        se_all = np.std(overall, ddof=1) / math.sqrt(len(overall))
        assert exact.lower - 3 * se_all <= np.mean(overall) <= exact.upper + 3 * se_all
        assert np.mean(nominal) == pytest.approx(exact.p_nominal, abs=3 * se + 0.02)


def test_spatiotemporal_peaks_and_max_loads_at_delta_nine():
    grid = load_grid(0.15, 0.45, 0.025)
    crdsa = run_experiment(_mac(CRDSA2, 9.0, grid, 100, 5))
    irsa = run_experiment(_mac(IRSA, 9.0, grid, 100, 6))
    assert peak(crdsa).throughput == pytest.approx(0.34, abs=0.03)
    assert peak(irsa).throughput == pytest.approx(0.24, abs=0.03)
    assert max_load_at_plr(crdsa, 0.1).g_max == pytest.approx(0.37, abs=0.03)
    assert max_load_at_plr(crdsa, 0.02).g_max == pytest.approx(0.32, abs=0.03)
    assert max_load_at_plr(irsa, 0.1).g_max == pytest.approx(0.28, abs=0.03)
    assert max_load_at_plr(irsa, 0.02).g_max == pytest.approx(0.26, abs=0.03)


def test_spatiotemporal_max_load_at_delta_eleven():
    rows = run_experiment(_mac(CRDSA2, 11.0, load_grid(0.15, 0.35, 0.025), 100, 7))
    assert max_load_at_plr(rows, 0.01).g_max == pytest.approx(0.27, abs=0.03)


def test_four_decoders_at_delta_nine():
    kinds = [DecoderKind.SPATIOTEMPORAL, DecoderKind.SPATIAL, DecoderKind.TEMPORAL, DecoderKind.NONCOOP]
    out = run_paired(_mac(CRDSA2, 9.0, load_grid(0.025, 0.5, 0.025), 30, 8), kinds)
    # Spatial and non-cooperative decoding use single-slot activations.
    aloha = _mac(named_distribution("ALOHA"), 9.0, load_grid(0.025, 0.5, 0.025), 30, 9)
    single = run_paired(aloha, [DecoderKind.SPATIAL, DecoderKind.NONCOOP])
    rows = {
        DecoderKind.SPATIOTEMPORAL: out[DecoderKind.SPATIOTEMPORAL],
        DecoderKind.TEMPORAL: out[DecoderKind.TEMPORAL],
        DecoderKind.SPATIAL: single[DecoderKind.SPATIAL],
        DecoderKind.NONCOOP: single[DecoderKind.NONCOOP],
    }
    peaks = {k: peak(v).throughput for k, v in rows.items()}
    assert peaks[DecoderKind.SPATIOTEMPORAL] == pytest.approx(0.34, abs=0.03)
    assert peaks[DecoderKind.SPATIAL] == pytest.approx(0.24, abs=0.03)
    assert peaks[DecoderKind.TEMPORAL] == pytest.approx(0.11, abs=0.03)
    assert peaks[DecoderKind.NONCOOP] == pytest.approx(0.11, abs=0.03)

    loads = {k: max_load_at_plr(v, 0.02).g_max for k, v in rows.items()}
    assert loads[DecoderKind.SPATIOTEMPORAL] == pytest.approx(0.32, abs=0.03)
    assert loads[DecoderKind.TEMPORAL] == pytest.approx(0.08, abs=0.03)
    assert loads[DecoderKind.SPATIAL] == pytest.approx(0.06, abs=0.03)
    assert loads[DecoderKind.NONCOOP] < 0.05 + 0.03


@pytest.mark.parametrize("delta", [2.0, 3.0])
def test_optimizer_recovers_degree_two(delta):
    res = optimize_lambda(OptimizerConfig(delta=delta, seed=0))
    assert total_variation(res.dist, point_mass(2)) <= 0.02


@pytest.mark.parametrize("delta", [0.1, 1.0])
def test_optimizer_matches_published_threshold(delta):
    cfg = OptimizerConfig(delta=delta, seed=0)
    published = threshold_estimate(delta, table1_distribution(delta), j_grid=cfg.j_final).value
    res = optimize_lambda(cfg)
    assert res.g_star >= published * 0.99


def test_two_mass_finetune_at_delta_seven():
    res = finetune_two_mass(7.0)
    assert res.lambda1 == 0.0
    assert res.g_star == threshold_estimate(7.0, point_mass(2), j_grid=2000).value


def test_phy_radius_calibration():
    cal = calibrate_radius(PhyConfig(m=40))
    assert cal.radius == pytest.approx(0.39, abs=0.02)
    assert not cal.capped


def test_phy_peaks_and_max_loads():
    grid = load_grid(0.025, 0.6, 0.025)
    crdsa = run_experiment(_phy(CRDSA2, grid, 40, 10))
    irsa = run_experiment(_phy(IRSA, grid, 40, 11))
    assert peak(crdsa).throughput == pytest.approx(0.35, abs=0.04)
    assert peak(irsa).throughput == pytest.approx(0.28, abs=0.04)
    for target, want_crdsa, want_irsa in ((0.01, 0.11, 0.09), (0.02, 0.16, 0.12), (0.1, 0.34, 0.26)):
        assert max_load_at_plr(crdsa, target).g_max == pytest.approx(want_crdsa, abs=0.03)
        assert max_load_at_plr(irsa, target).g_max == pytest.approx(want_irsa, abs=0.03)


def test_phy_peak_grows_linearly_with_stations():
    spec = _phy(CRDSA2, load_grid(0.1, 0.6, 0.05), 10, 12)
    points = linearity_study(spec, [10, 20, 40, 80])
    fit = linear_fit([(p.m, p.unnormalized_peak) for p in points])
    assert fit.r_squared >= 0.98
    assert fit.slope > 0.0
