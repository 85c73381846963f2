"""Path containers: scalar processes, maturity-indexed families, predictable sets.

Containers are immutable (values arrays are frozen on construction) and
carry their grids, so downstream operations can check alignment instead
of trusting the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grids import GRID_TOL, MaturityGrid, TimeGrid

__all__ = ["ProcessPaths", "FamilyPaths", "PredictableSet"]

PRICE_AT_MATURITY_TOL = 1e-9


def _frozen(values, shape_hint: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{shape_hint} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProcessPaths:
    """Scalar paths, values[s][n] observed at time_grid.points[n]."""

    values: np.ndarray
    time_grid: TimeGrid

    def __post_init__(self):
        arr = _frozen(self.values, "process paths")
        if arr.ndim != 2:
            raise ValueError(f"process paths must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("no scenarios")
        if arr.shape[1] != self.time_grid.n_points:
            raise ValueError("time axis does not match the time grid")
        object.__setattr__(self, "values", arr)

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]

    def increments(self) -> np.ndarray:
        return self.values[:, 1:] - self.values[:, :-1]

    def stopped(self, stop_index) -> "ProcessPaths":
        """Freeze each path after its stop index (int or per-scenario array)."""
        n = self.time_grid.n_points
        idx = np.broadcast_to(np.asarray(stop_index, dtype=np.int64), (self.n_scenarios,))
        if np.any(idx < 0) or np.any(idx >= n):
            raise ValueError("stop index out of range")
        cols = np.minimum(np.arange(n)[None, :], idx[:, None])
        return ProcessPaths(np.take_along_axis(self.values, cols, axis=1), self.time_grid)

    def _binary(self, other, op) -> "ProcessPaths":
        if isinstance(other, ProcessPaths):
            if other.time_grid.n_points != self.time_grid.n_points or not np.array_equal(
                other.time_grid.points, self.time_grid.points
            ):
                raise ValueError("time grids differ")
            other = other.values
        return ProcessPaths(op(self.values, other), self.time_grid)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, c):
        return ProcessPaths(self.values * float(c), self.time_grid)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FamilyPaths:
    """Maturity-indexed family, values[s][n][m] for maturity points[m].

    With ``is_price_family`` set the container enforces positivity and a
    unit value wherever a grid time coincides with a maturity.
    """

    values: np.ndarray
    time_grid: TimeGrid
    maturity_grid: MaturityGrid
    is_price_family: bool = False

    def __post_init__(self):
        arr = _frozen(self.values, "family paths")
        if arr.ndim != 3:
            raise ValueError(f"family paths must be 3-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("no scenarios")
        if arr.shape[1] != self.time_grid.n_points:
            raise ValueError("time axis does not match the time grid")
        if arr.shape[2] != self.maturity_grid.n_points:
            raise ValueError("maturity axis does not match the maturity grid")
        object.__setattr__(self, "values", arr)
        if self.is_price_family:
            if np.any(arr <= 0.0):
                raise ValueError("price family must be strictly positive")
            t = self.time_grid.points
            for m, x in enumerate(self.maturity_grid.points):
                hits = np.flatnonzero(np.abs(t - x) <= GRID_TOL)
                for n in hits:
                    if np.any(np.abs(arr[:, n, m] - 1.0) > PRICE_AT_MATURITY_TOL):
                        raise ValueError(
                            f"price at own maturity must be 1 (t={t[n]!r}, x={x!r})"
                        )

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[0]

    def column(self, x: float, tol: float = GRID_TOL) -> ProcessPaths:
        m = self.maturity_grid.index_of(x, tol)
        return ProcessPaths(self.values[:, :, m], self.time_grid)

    def column_index(self, x: float, tol: float = GRID_TOL) -> int:
        return self.maturity_grid.index_of(x, tol)

    def terminal_slice(self) -> np.ndarray:
        return self.values[:, -1, :]

    def with_values(self, values) -> "FamilyPaths":
        return replace(self, values=values)


@dataclass(frozen=True)
class PredictableSet:
    """Indicator of step sets: flag at index n governs the increment over
    (t_n, t_{n+1}], so the indicator has one column per grid step."""

    indicator: np.ndarray
    time_grid: TimeGrid

    def __post_init__(self):
        arr = np.ascontiguousarray(self.indicator, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("indicator must be 2-D")
        if arr.shape[1] != self.time_grid.n_steps:
            raise ValueError("indicator needs one column per grid step")
        arr.setflags(write=False)
        object.__setattr__(self, "indicator", arr)

    @classmethod
    def from_rule(cls, family: FamilyPaths, rule) -> "PredictableSet":
        """Build from ``rule(n, prefix) -> (S,) bool`` where prefix is the
        family history up to and including t_n.  The rule only ever sees
        past data, so the resulting set is predictable by construction."""
        n_scen = family.n_scenarios
        steps = family.time_grid.n_steps
        ind = np.empty((n_scen, steps), dtype=bool)
        for n in range(steps):
            flags = np.broadcast_to(np.asarray(rule(n, family.values[:, : n + 1, :]), dtype=bool), (n_scen,))
            ind[:, n] = flags
        return cls(ind, family.time_grid)

    @classmethod
    def full(cls, time_grid: TimeGrid, n_scenarios: int) -> "PredictableSet":
        return cls(np.ones((n_scenarios, time_grid.n_steps), dtype=bool), time_grid)

    def __or__(self, other: "PredictableSet") -> "PredictableSet":
        self._check(other)
        return PredictableSet(self.indicator | other.indicator, self.time_grid)

    def __and__(self, other: "PredictableSet") -> "PredictableSet":
        self._check(other)
        return PredictableSet(self.indicator & other.indicator, self.time_grid)

    def _check(self, other: "PredictableSet"):
        if not np.array_equal(other.time_grid.points, self.time_grid.points):
            raise ValueError("time grids differ")
