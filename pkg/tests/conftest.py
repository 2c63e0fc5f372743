from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

SIM_DIR = Path(__file__).resolve().parents[1] / "sim"
if str(SIM_DIR) not in sys.path:
    sys.path.insert(0, str(SIM_DIR))

from aloha.geometry import PlacementConfig, SystemInstance, sample_instance  # noqa: E402
from aloha.traffic import named_distribution  # noqa: E402
from harness import cluster_layout  # noqa: E402


FIGURE_R = 0.1


@pytest.fixture
def chain_instance() -> SystemInstance:
    """Three users in one slot whose spatial SIC unlocks one user per sweep.

    Stations B1..B4 cover {A}, {A, B}, {A, B}, {B, C} at r = 0.1.
    """
    stations = [(-0.1, 0.0), (0.0, 0.05), (0.0, -0.05), (0.15, 0.0)]
    users = [(-0.05, 0.0), (0.06, 0.0), (0.22, 0.0)]
    return SystemInstance(users=users, stations=stations, activations=[(1,), (1,), (1,)], tau=1)


@pytest.fixture
def stopping_set_instance() -> SystemInstance:
    """Four clustered users sharing slot 1 under two stations that both cover all of them."""
    users, stations = cluster_layout(FIGURE_R)
    return SystemInstance(users=users, stations=stations, activations=[(1,)] * 4, tau=1)


@pytest.fixture
def private_slot_instance() -> SystemInstance:
    """Same cluster, degree-two activations that each own one private slot."""
    users, stations = cluster_layout(FIGURE_R)
    return SystemInstance(users=users, stations=stations, activations=[(1, 2), (1, 3), (1, 4), (1, 5)], tau=5)


def random_small_instance(rng: np.random.Generator, max_users: int = 8, max_stations: int = 3, max_slots: int = 4):
    n = int(rng.integers(1, max_users + 1))
    m = int(rng.integers(1, max_stations + 1))
    tau = int(rng.integers(1, max_slots + 1))
    r = float(rng.uniform(0.2, 0.7))
    acts = []
    for _ in range(n):
        q = int(rng.integers(1, tau + 1))
        acts.append(tuple((rng.permutation(tau)[:q] + 1).tolist()))
    inst = SystemInstance(
        users=rng.uniform(-0.5, 0.5, (n, 2)),
        stations=rng.uniform(-0.5, 0.5, (m, 2)),
        activations=acts,
        tau=tau,
    )
    return inst, r


@pytest.fixture
def crdsa2():
    return named_distribution("CRDSA2")


@pytest.fixture
def medium_instance(crdsa2):
    cfg = PlacementConfig.from_delta(n=60, m=6, tau=8, delta=3.0, seed=11)
    return sample_instance(cfg, crdsa2), cfg.r


@pytest.fixture
def small_instance_factory():
    return random_small_instance
