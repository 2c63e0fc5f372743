from __future__ import annotations

import math

import numpy as np
import pytest

from aloha.traffic import (
    TABLE1,
    DegreeDistribution,
    from_pairs,
    mean_degree,
    named_distribution,
    point_mass,
    sample_degrees,
    table1_distribution,
    total_variation,
    two_mass,
)
from errors import ConfigError, UnknownDistribution
from util import derive_rng


def test_named_distributions():
    assert named_distribution("aloha").probs[0] == 1.0
    assert named_distribution("CRDSA2").prob(2) == 1.0
    irsa = named_distribution("IRSA")
    assert irsa.mean == pytest.approx(3.6)
    assert irsa.max_degree == 8
    assert dict(irsa.pairs()) == {2: 0.5, 3: 0.28, 8: 0.22}


def test_unknown_name_raises_config_error():
    with pytest.raises(UnknownDistribution) as exc:
        named_distribution("SLOTTED")
    assert isinstance(exc.value, ConfigError)
    assert exc.value.code == "unknown_distribution"


@pytest.mark.parametrize(
    "probs",
    [
        (0.5, 0.4),
        (1.2, -0.2),
        (),
        (float("nan"), 1.0),
    ],
)
def test_invalid_distribution(probs):
    with pytest.raises(ConfigError):
        DegreeDistribution(probs)


def test_sum_tolerance_accepts_rounding():
    DegreeDistribution((0.1, 0.2, 0.7 + 5e-10))


def test_from_pairs_extends_and_merges():
    dist = from_pairs([(2, 0.25), (2, 0.25), (10, 0.5)])
    assert dist.s_max == 10
    assert dist.prob(2) == 0.5
    assert dist.max_degree == 10
    with pytest.raises(ConfigError):
        from_pairs([(0, 1.0)])


def test_two_mass_and_point_mass():
    assert two_mass(0.3).probs[:2] == (0.3, 0.7)
    assert two_mass(1.7).prob(1) == 1.0
    assert point_mass(3).max_degree == 3
    assert point_mass(3).mean == 3.0


def test_table1_rows_are_valid_distributions():
    for delta in TABLE1:
        dist = table1_distribution(delta)
        assert dist.s_max == 8
    assert table1_distribution(7.0).prob(1) == pytest.approx(0.10)
    with pytest.raises(UnknownDistribution):
        table1_distribution(4.0)


def test_total_variation():
    a = point_mass(2)
    assert total_variation(a, a) == 0.0
    assert total_variation(a, point_mass(3)) == 1.0
    assert total_variation(two_mass(0.2), a) == pytest.approx(0.2)


def test_sample_frequencies_follow_distribution():
    irsa = named_distribution("IRSA")
    draws = irsa.sample(derive_rng(3), 40_000)
    assert set(np.unique(draws)) <= {2, 3, 8}
    assert np.mean(draws) == pytest.approx(irsa.mean, abs=0.05)
    assert irsa.sample(derive_rng(3), 0).size == 0


def test_mean_matches_definition():
    dist = table1_distribution(0.1)
    assert dist.mean == pytest.approx(math.fsum(s * p for s, p in enumerate(dist.probs, start=1)))
    assert mean_degree(dist) == dist.mean


def test_sample_degrees_matches_method():
    crdsa = named_distribution("CRDSA2")
    assert sample_degrees(crdsa, derive_rng(1), 5).tolist() == [2] * 5
    assert np.array_equal(sample_degrees(crdsa, derive_rng(4), 7), crdsa.sample(derive_rng(4), 7))
