from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform backward-time grid t_k = k h on [0, T], h = T / N."""

    T: float
    N: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError("horizon T must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError("step count N must be a positive integer")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def from_step(cls, T: float, h: float) -> "TimeGrid":
        n = round(T / h)
        if n < 1 or abs(n * h - T) > 1e-9 * max(1.0, T):
            raise ConfigurationError(f"h={h} does not divide T={T} into whole steps")
        return cls(T, n)

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.h

    def forward_time(self, k: int) -> float:
        """Forward time T - t_k at which step k evaluates the score."""
        return self.T - k * self.h
