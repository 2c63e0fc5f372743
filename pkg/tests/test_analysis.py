from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from aloha.analysis import (
    AreaSamples,
    _range_flag,
    noncoop_asymptotic,
    noncoop_exact,
    noncoop_lower_envelope,
    noncoop_peak_lower_bound,
    noncoop_slope_at_zero,
    peak_throughput_bounds,
    required_k_max,
    sample_alphas,
    single_bs_aloha_throughput,
    spatial_slope_at_zero,
    spatial_upper_bound,
    spatial_upper_bound_finite,
    temporal_lower_bound,
    temporal_peak_lower_bound,
    threshold_bounds,
    union_area_grid,
    zeta_coefficients,
)
from aloha.constants import UNIT_DISK_RADIUS
from aloha.decode import DecoderKind, decode
from aloha.geometry import PlacementConfig, coverage_probability, nominal_mask, sample_instance
from aloha.traffic import named_distribution
from errors import ConfigError, InsufficientAreaSamples
from util import derive_rng


CRDSA2 = named_distribution("CRDSA2")


def _mean_pair_union() -> float:
    """Mean union area of two unit-area disks with centres uniform in a unit-area disk."""
    rho = UNIT_DISK_RADIUS

    def lens(d: float) -> float:
        return 2 * rho**2 * math.acos(d / (2 * rho)) - 0.5 * d * math.sqrt(4 * rho**2 - d**2)

    def density(d: float) -> float:
        u = d / (2 * rho)
        return (2 * d / rho**2) * (2 / math.pi) * (math.acos(u) - u * math.sqrt(1 - u * u))

    value, _ = quad(lambda d: (2.0 - lens(d)) * density(d), 0.0, 2 * rho)
    return value


def _coincident(k_max: int, n: int = 4) -> AreaSamples:
    return AreaSamples(samples=np.ones((k_max, n)))


def test_union_area_grid():
    rho = UNIT_DISK_RADIUS
    assert union_area_grid([(0.0, 0.0)]) == pytest.approx(1.0, abs=5e-3)
    assert union_area_grid([(0.0, 0.0), (0.0, 0.0)]) == pytest.approx(1.0, abs=5e-3)
    assert union_area_grid([(0.0, 0.0), (3 * rho, 0.0)]) == pytest.approx(2.0, abs=1e-2)
    assert union_area_grid([]) == 0.0


def test_hit_or_miss_matches_pair_integral():
    areas = sample_alphas(2, 4000, seed=5, inner_points=4096)
    assert areas.mean(1) == 1.0
    assert areas.mean(2) == pytest.approx(_mean_pair_union(), abs=0.02)


def test_samples_are_bounded_and_nested():
    areas = sample_alphas(6, 512, seed=1, inner_points=512)
    assert areas.samples.shape == (6, 512)
    assert np.all(areas.samples >= 1.0) and np.all(areas.samples <= 4.0)
    assert np.all(np.diff(areas.samples, axis=0) >= 0.0)
    assert np.all(np.diff(areas.means) > 0.0)
    assert np.all(areas.stderr[1:] > 0.0)


def test_polygon_method_agrees():
    areas = sample_alphas(3, 200, seed=2, method="polygon", chunk_size=50)
    assert areas.method == "polygon"
    assert np.all(np.diff(areas.samples, axis=0) >= 0.0)
    assert np.all(areas.samples <= 4.0)
    assert areas.mean(2) == pytest.approx(_mean_pair_union(), abs=0.06)


def test_sampling_is_reproducible_across_workers():
    serial = sample_alphas(3, 300, seed=9, inner_points=256, chunk_size=100)
    pooled = sample_alphas(3, 300, seed=9, inner_points=256, chunk_size=100, workers=2)
    assert np.array_equal(serial.samples, pooled.samples)


def test_sample_alphas_validation():
    with pytest.raises(ConfigError):
        sample_alphas(0, 10)
    with pytest.raises(ConfigError):
        sample_alphas(2, 10, method="voronoi")


def test_zeta_identity():
    m, r = 12, 0.1
    p = r * r * math.pi
    zeta = zeta_coefficients(m, r)
    for k in range(1, m + 1):
        assert zeta[k - 1] == pytest.approx(math.comb(m, k) * p**k, rel=1e-9)
    with pytest.raises(ConfigError):
        zeta_coefficients(3, 0.7)


def test_exact_formula_single_user_is_coverage():
    cfg = PlacementConfig(n=1, m=10, tau=5, r=0.1)
    res = noncoop_exact(cfg, _coincident(10))
    assert res.p_nominal == pytest.approx(coverage_probability(10, 0.1), rel=1e-9)
    assert res.lower <= res.p_nominal <= res.upper
    assert res.terms == 10
    assert res.flag is None


def test_exact_formula_guards():
    with pytest.raises(ConfigError):
        noncoop_exact(PlacementConfig(n=5, m=4, tau=2, r=0.3), _coincident(4))
    with pytest.raises(InsufficientAreaSamples):
        noncoop_exact(PlacementConfig(n=5, m=8, tau=2, r=0.1), _coincident(4))
    truncated = noncoop_exact(PlacementConfig(n=5, m=8, tau=2, r=0.1), _coincident(4), k_trunc=4)
    assert truncated.terms == 4


def test_exact_formula_decreases_with_users():
    areas = sample_alphas(6, 256, seed=3, inner_points=512)
    few = noncoop_exact(PlacementConfig(n=10, m=6, tau=10, r=0.1), areas)
    many = noncoop_exact(PlacementConfig(n=200, m=6, tau=10, r=0.1), areas)
    assert many.p_nominal < few.p_nominal


def test_asymptotic_with_coincident_disks_is_envelope():
    for g in (0.0, 0.3, 1.0):
        value = noncoop_asymptotic(2.0, g, _coincident(40), mode="accurate")
        assert value.value == pytest.approx(noncoop_lower_envelope(2.0, g), abs=1e-9)
        assert value.ok


def test_asymptotic_guards():
    assert required_k_max(2.0) == 10
    assert required_k_max(0.01) == 1
    with pytest.raises(InsufficientAreaSamples):
        noncoop_asymptotic(2.0, 0.5, _coincident(3))
    with pytest.raises(ConfigError):
        noncoop_asymptotic(2.0, 0.5, _coincident(12), mode="exact")
    with pytest.raises(ConfigError):
        noncoop_asymptotic(0.0, 0.5, _coincident(12))


def test_asymptotic_at_zero_load_is_coverage():
    areas = sample_alphas(10, 200, seed=4, inner_points=256)
    assert noncoop_asymptotic(2.0, 0.0, areas).value == pytest.approx(-math.expm1(-2.0), abs=1e-4)
    slow = noncoop_asymptotic(2.0, 0.2, areas, mode="fast").value
    assert slow < -math.expm1(-2.0)
    assert noncoop_slope_at_zero(2.0, areas) > 0.0


def test_range_flag():
    assert _range_flag(0.5) is None
    assert _range_flag(1.0 + 1e-7) is None
    assert _range_flag(1.1) == "out_of_range"
    assert _range_flag(-0.01) == "out_of_range"


def test_spatial_bounds():
    assert spatial_upper_bound(3.0, 0.0) == pytest.approx(-math.expm1(-3.0))
    assert spatial_upper_bound(3.0, 1.0) < spatial_upper_bound(3.0, 0.5)
    h = 1e-6
    slope = (spatial_upper_bound(3.0, h) - spatial_upper_bound(3.0, 0.0)) / h
    assert -slope == pytest.approx(spatial_slope_at_zero(3.0), rel=1e-4)
    finite = spatial_upper_bound_finite(n=400, m=40, tau=20, r=0.05)
    assert 0.0 < finite < 1.0


def test_temporal_bound_and_threshold_bounds():
    assert temporal_lower_bound(3.0, 0.01, CRDSA2, eps=0.01) == pytest.approx(-math.expm1(-3.0), abs=1e-8)
    with pytest.raises(ConfigError):
        temporal_lower_bound(3.0, 0.01, CRDSA2, eps=0.0)
    bounds = threshold_bounds(2.0, CRDSA2, hstar=0.48)
    assert bounds.temporal_lb == pytest.approx(0.06)
    assert bounds.noncoop == 0.0 and bounds.spatial == 0.0
    with pytest.raises(ConfigError):
        threshold_bounds(0.0, CRDSA2)


def test_peak_bounds():
    eps = 0.05
    delta = math.log(1.0 / eps)
    bounds = peak_throughput_bounds(eps, hstar=0.48)
    assert bounds.noncoop_lb == pytest.approx(noncoop_peak_lower_bound(delta))
    assert bounds.temporal_lb == pytest.approx(temporal_peak_lower_bound(delta, 0.48))
    with pytest.raises(ConfigError):
        peak_throughput_bounds(0.9995)
    assert single_bs_aloha_throughput(1.0) == pytest.approx(1.0 / math.e)


def _noncoop_fractions(cfg: PlacementConfig, trials: int, seed: int):
    """Per-trial collected fractions over all users and over nominal users."""
    aloha = named_distribution("ALOHA")
    overall, nominal = [], []
    for trial in range(trials):
        inst = sample_instance(cfg, aloha, derive_rng(seed, trial))
        got = np.zeros(inst.n, dtype=bool)
        got[sorted(decode(DecoderKind.NONCOOP, inst, cfg.r).collected_set())] = True
        mask = nominal_mask(inst.users, cfg.r)
        overall.append(got.mean())
        nominal.append(got[mask].mean())
    return np.asarray(overall), np.asarray(nominal)


@pytest.mark.parametrize("g", [0.1, 0.5])
def test_noncoop_simulation_matches_formulas(g):
    m, tau, delta = 40, 40, 2.0
    cfg = PlacementConfig.from_delta(int(round(g * tau * m)), m, tau, delta)
    areas = sample_alphas(required_k_max(delta), 2000, seed=11, inner_points=1024)
    overall, nominal = _noncoop_fractions(cfg, trials=30, seed=17)
    se_all = overall.std(ddof=1) / math.sqrt(overall.size)
    se_nom = nominal.std(ddof=1) / math.sqrt(nominal.size)

    exact = noncoop_exact(cfg, areas, k_trunc=areas.k_max)
    assert exact.lower - 3 * se_all <= overall.mean() <= exact.upper + 3 * se_all
    assert nominal.mean() == pytest.approx(exact.p_nominal, abs=3 * se_nom + 0.02)

    asymptotic = noncoop_asymptotic(delta, g, areas, mode="accurate").value
    assert nominal.mean() == pytest.approx(asymptotic, abs=3 * se_nom + 0.03)
