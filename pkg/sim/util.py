from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def stable_sum(values: Iterable[float]) -> float:
    # Exactly rounded; alternating inclusion-exclusion sums cancel heavily.
    return math.fsum(values)


def derive_rng(*keys: int) -> np.random.Generator:
    """Independent generator for a (master seed, index, ...) tuple.

    SeedSequence mixing keeps streams of neighbouring trials unrelated, so a trial
    draws the same numbers whether it runs serially or in a worker process.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    mean = stable_sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = stable_sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var / len(values))


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(f"{path.suffix}.tmp")
    tmp_path.write_text(text, encoding="utf-8")
    os.replace(tmp_path, path)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(f"{path.suffix}.tmp")
    tmp_path.write_bytes(data)
    os.replace(tmp_path, path)
