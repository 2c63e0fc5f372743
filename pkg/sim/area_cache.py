from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from aloha.analysis import AreaSamples, sample_alphas
from aloha.constants import AREA_CACHE_SCHEMA_VERSION, AREA_INNER_POINTS
from export import write_csv
from util import atomic_write_bytes


log = logging.getLogger(__name__)


def cache_file(cache_dir: Path, k_max: int, n_samples: int, seed: int, inner_points: int, method: str) -> Path:
    return Path(cache_dir) / f"alphas_k{k_max}_n{n_samples}_s{seed}_i{inner_points}_{method}.npz"


def save_areas(path: Path, areas: AreaSamples) -> None:
    buf = io.BytesIO()
    np.savez_compressed(
        buf,
        schema_version=np.array(AREA_CACHE_SCHEMA_VERSION),
        samples=areas.samples,
        seed=np.array(areas.seed),
        inner_points=np.array(areas.inner_points),
        method=np.array(areas.method),
    )
    atomic_write_bytes(path, buf.getvalue())


def load_areas(path: Path) -> Optional[AreaSamples]:
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            if int(data["schema_version"]) != AREA_CACHE_SCHEMA_VERSION:
                log.warning("ignoring %s: schema %s", path, int(data["schema_version"]))
                return None
            return AreaSamples(
                samples=data["samples"],
                seed=int(data["seed"]),
                inner_points=int(data["inner_points"]),
                method=str(data["method"]),
            )
    except (OSError, KeyError, ValueError) as exc:
        log.warning("unreadable area cache %s: %s", path, exc)
        return None


def load_or_sample(
    cache_dir: Path,
    k_max: int,
    n_samples: int,
    seed: int = 0,
    inner_points: int = AREA_INNER_POINTS,
    method: str = "hit_or_miss",
    workers: int = 1,
    progress: bool = False,
) -> AreaSamples:
    path = cache_file(cache_dir, k_max, n_samples, seed, inner_points, method)
    cached = load_areas(path)
    if cached is not None:
        log.info("area cache hit %s", path.name)
        return cached
    areas = sample_alphas(
        k_max, n_samples, seed=seed, inner_points=inner_points, method=method, workers=workers, progress=progress
    )
    save_areas(path, areas)
    return areas


def export_means(path: Path, areas: AreaSamples) -> Path:
    rows = [(k, float(mean), float(se)) for k, (mean, se) in enumerate(zip(areas.means, areas.stderr), start=1)]
    meta = {
        "k_max": areas.k_max,
        "n_samples": areas.n_samples,
        "seed": areas.seed,
        "inner_points": areas.inner_points,
        "method": areas.method,
    }
    return write_csv(path, ("k", "alpha_mean", "stderr"), rows, meta=meta)
