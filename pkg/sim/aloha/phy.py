from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from aloha.constants import (
    DOMAIN_DIAMETER,
    PHY_ALPHA,
    PHY_CALIBRATION_SAMPLES,
    PHY_CALIBRATION_TOL,
    PHY_MIN_DISTANCE,
    PHY_NOISE,
    PHY_THETA,
)
from aloha.decode import DecodeOutcome
from aloha.geometry import SystemInstance, coverage_matrix
from errors import ConfigError, NumericalError
from util import derive_rng


log = logging.getLogger(__name__)

CALIBRATION_R_MIN = 1e-6
SNR_READINGS = ("single", "double")


@dataclass(frozen=True)
class PhyConfig:
    m: int = 40
    alpha: float = PHY_ALPHA
    theta: float = PHY_THETA
    noise: float = PHY_NOISE
    snr_reading: str = "single"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ConfigError("invalid_phy", f"m={self.m} must be >= 1.")
        if self.alpha < 0.0:
            raise ConfigError("invalid_phy", f"alpha={self.alpha} must be >= 0.")
        if self.theta <= 0.0:
            raise ConfigError("invalid_phy", f"theta={self.theta} must be > 0.")
        if self.noise <= 0.0:
            raise ConfigError("invalid_phy", f"noise={self.noise} must be > 0.")
        if self.snr_reading not in SNR_READINGS:
            raise ConfigError("invalid_phy", f"snr_reading must be one of {SNR_READINGS}.")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Fading gains indexed [user, station, slot - 1] and per-user transmit power."""

    gains: np.ndarray
    tx_power: np.ndarray

    def __post_init__(self) -> None:
        gains = np.array(self.gains, dtype=float, ndmin=3)
        tx = np.array(self.tx_power, dtype=float, ndmin=1)
        if np.any(gains < 0.0) or np.any(tx < 0.0):
            raise ConfigError("invalid_channel", "Gains and transmit powers must be nonnegative.")
        gains.setflags(write=False)
        tx.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "tx_power", tx)


def _distances(inst: SystemInstance) -> np.ndarray:
    if inst.n == 0:
        return np.zeros((0, inst.m))
    return cdist(inst.users, inst.stations)


def _fading(rng: np.random.Generator, shape) -> np.ndarray:
    # Rayleigh power times log-normal shadowing with standard-normal log.
    return rng.exponential(1.0, shape) * rng.lognormal(0.0, 1.0, shape)


def sample_channel(inst: SystemInstance, cfg: PhyConfig, rng: Optional[np.random.Generator] = None) -> ChannelRealization:
    if inst.m < 1:
        raise ConfigError("invalid_channel", "Power control needs at least one station.")
    rng = rng if rng is not None else derive_rng(cfg.seed)
    d = _distances(inst)
    r_min = d.min(axis=1) if inst.n else np.zeros(0)
    return ChannelRealization(gains=_fading(rng, (inst.n, inst.m, inst.tau)), tx_power=r_min ** cfg.alpha)


def received_power(inst: SystemInstance, chan: ChannelRealization, cfg: PhyConfig) -> np.ndarray:
    """P[j, l, t-1]; zero where user j is silent at slot t."""
    d = np.maximum(_distances(inst), PHY_MIN_DISTANCE)
    path = chan.tx_power[:, None] / d ** cfg.alpha
    return chan.gains * path[:, :, None] * inst.activity_matrix()[:, None, :]


def _snr_draws(cfg: PhyConfig, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of r_min^alpha * g with stations of density m per unit area and no border.

    The nearest-station distance follows P(r_min > x) = exp(-m pi x^2), so users near
    the edge of the square do not inflate the power-control term.
    """
    r_min = np.sqrt(rng.exponential(1.0, n_samples) / (math.pi * cfg.m))
    return r_min ** cfg.alpha * _fading(rng, n_samples)


def _snr_at(draws: np.ndarray, cfg: PhyConfig, r_prime: float) -> Tuple[float, float]:
    power = 2.0 * cfg.alpha if cfg.snr_reading == "double" else cfg.alpha
    scale = 1.0 / (r_prime ** power * cfg.noise)
    mean = float(draws.mean()) * scale
    stderr = float(draws.std(ddof=1)) / math.sqrt(draws.size) * scale if draws.size > 1 else 0.0
    return mean, stderr


def expected_snr(
    cfg: PhyConfig,
    r_prime: float,
    n_samples: int = PHY_CALIBRATION_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    rng = rng if rng is not None else derive_rng(cfg.seed)
    return _snr_at(_snr_draws(cfg, n_samples, rng), cfg, r_prime)


@dataclass(frozen=True)
class Calibration:
    radius: float
    snr_mean: float
    snr_stderr: float
    samples: int
    capped: bool = False


def calibrate_radius(
    cfg: PhyConfig,
    n_samples: int = PHY_CALIBRATION_SAMPLES,
    tol: float = PHY_CALIBRATION_TOL,
    rng: Optional[np.random.Generator] = None,
) -> Calibration:
    """Largest r' whose mean SNR at distance r' still reaches theta.

    One batch of draws serves every candidate r', so the estimate is monotone in r'.
    """
    rng = rng if rng is not None else derive_rng(cfg.seed)
    draws = _snr_draws(cfg, n_samples, rng)

    def snr(r: float) -> Tuple[float, float]:
        return _snr_at(draws, cfg, r)

    if snr(DOMAIN_DIAMETER)[0] >= cfg.theta:
        mean, se = snr(DOMAIN_DIAMETER)
        return Calibration(DOMAIN_DIAMETER, mean, se, n_samples, capped=True)
    if snr(CALIBRATION_R_MIN)[0] < cfg.theta:
        raise NumericalError("threshold_unreachable", f"Mean SNR stays below theta={cfg.theta} for every radius.")
    lo, hi = CALIBRATION_R_MIN, DOMAIN_DIAMETER
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if snr(mid)[0] >= cfg.theta:
            lo = mid
        else:
            hi = mid
    mean, se = snr(lo)
    log.info("calibrated radius %.4f (mean SNR %.4f +- %.4f)", lo, mean, se)
    return Calibration(lo, mean, se, n_samples)


def decode_phy_spatiotemporal(inst: SystemInstance, chan: ChannelRealization, cfg: PhyConfig, r: float) -> DecodeOutcome:
    """Synchronous SINR-threshold SIC over all (station, slot) receivers.

    Each receiver tries its strongest remaining user against the noise plus every other
    remaining user; a decoded user is cancelled only at stations within r.
    """
    n, m = inst.n, inst.m
    power = received_power(inst, chan, cfg)
    cov = coverage_matrix(inst, r)
    decoded = np.zeros(n, dtype=bool)
    cols = np.arange(m)

    active: Dict[int, np.ndarray] = {}
    rows: Dict[int, Dict[int, int]] = {}
    remaining: Dict[int, np.ndarray] = {}
    for t in range(1, inst.tau + 1):
        users = np.asarray(inst.active_users(t), dtype=int)
        if users.size:
            active[t] = users
            rows[t] = {int(u): k for k, u in enumerate(users)}
            remaining[t] = np.ones((users.size, m), dtype=bool)

    per_iter: List[int] = []
    for _ in range(max(n, 1)):
        fresh = set()
        for t, users in active.items():
            p = power[users, :, t - 1]
            live = remaining[t]
            totals = np.where(live, p, 0.0).sum(axis=0)
            masked = np.where(live, p, -np.inf)
            best_row = np.argmax(masked, axis=0)
            best = masked[best_row, cols]
            ok = np.isfinite(best)
            interference = np.maximum(totals - np.where(ok, best, 0.0), 0.0)
            sinr = np.where(ok, best, 0.0) / (cfg.noise + interference)
            hit = ok & (sinr >= cfg.theta) & cov[users[best_row], cols]
            fresh.update(int(u) for u in users[best_row[hit]] if not decoded[u])
        if not fresh:
            break
        for u in fresh:
            decoded[u] = True
            for t in inst.activations[u]:
                remaining[t][rows[t][u], cov[u]] = False
        per_iter.append(len(fresh))

    decoded.setflags(write=False)
    return DecodeOutcome(collected=decoded, iterations_used=len(per_iter), per_iteration_collected=tuple(per_iter))
