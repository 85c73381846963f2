"""Monte Carlo summary helpers shared by verdicts and tests."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["mc_mean_se", "within_se", "RunningMoments"]


def mc_mean_se(samples) -> tuple:
    """Sample mean and its standard error."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    se = float(np.std(x, ddof=1) / math.sqrt(x.size))
    return float(x.mean()), se


def within_se(samples, target: float, n_se: float = 3.0) -> bool:
    mean, se = mc_mean_se(samples)
    return abs(mean - target) <= n_se * se


class RunningMoments:
    """Streaming mean/standard error over scenario blocks."""

    def __init__(self):
        self.count = 0
        self._sum = 0.0
        self._sumsq = 0.0

    def add(self, samples):
        x = np.asarray(samples, dtype=np.float64).ravel()
        self.count += x.size
        self._sum += float(x.sum())
        self._sumsq += float(x @ x)

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("no samples")
        return self._sum / self.count

    @property
    def se(self) -> float:
        if self.count < 2:
            raise ValueError("need at least 2 samples")
        var = (self._sumsq - self._sum * self._sum / self.count) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)
