from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Flagged:
    """A numeric result that may carry a degenerate-case flag instead of raising."""

    value: float
    flag: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.flag is None

    def __float__(self) -> float:
        return float(self.value)
