"""Time and maturity lattices plus counter-based scenario streams.

Every stochastic object in the package lives on a pair of grids: a time
grid 0 = t_0 < t_1 < ... < t_{N-1} = T and a maturity grid inside
[0, T*].  Scenario randomness is organised so that the draws for one
scenario depend only on (seed, stream, scenario index): streams are
backed by Philox counters, and all transforms are inverse-CDF maps of
uniforms, so regenerating any scenario block reproduces the original
bits regardless of how many scenarios surround it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

__all__ = [
    "GRID_TOL",
    "SCENARIO_BLOCK",
    "TimeGrid",
    "MaturityGrid",
    "ScenarioSet",
    "snap_index",
]

# Tolerance used whenever a float has to be matched against a grid node.
GRID_TOL = 1e-9

# Fixed scenario block width.  Streamed pipelines draw one block at a
# time; because each block owns its own counter key, blocked and
# whole-run generation agree bit for bit.
SCENARIO_BLOCK = 4096

# Stream tags.  Each purpose gets its own counter family so adding a new
# consumer never shifts the draws of an existing one.
STREAM_JUMP_TIMES = 1
STREAM_FACTORS = 2
STREAM_CONTROL_SIGNS = 3
STREAM_OPTIMIZER = 4
STREAM_TEST = 9


def snap_index(points: np.ndarray, x: float, tol: float = GRID_TOL, what: str = "point") -> int:
    """Index of the grid node matching ``x`` within ``tol``, else ValueError."""
    idx = int(np.searchsorted(points, x))
    for j in (idx - 1, idx, idx + 1):
        if 0 <= j < points.size and abs(points[j] - x) <= tol:
            return j
    raise ValueError(f"{what} {x!r} is not on the grid (tol={tol:g})")


def _validated_points(points, what: str) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{what} needs at least two points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite points")
    if np.any(np.diff(arr) <= 0.0):
        raise ValueError(f"{what} must be strictly increasing")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation times starting at 0.

    Parameters
    ----------
    points : array_like
        Grid times; ``points[0]`` must be 0 and ``points[-1]`` is the
        horizon T > 0.
    """

    points: np.ndarray

    def __post_init__(self):
        arr = _validated_points(self.points, "time grid")
        if arr[0] != 0.0:
            raise ValueError("time grid must start at 0")
        object.__setattr__(self, "points", arr)

    @classmethod
    def uniform(cls, horizon: float, steps: int) -> "TimeGrid":
        if steps < 1:
            raise ValueError("need at least one step")
        if not horizon > 0.0:
            raise ValueError("horizon must be positive")
        return cls(np.linspace(0.0, horizon, steps + 1))

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)

    def index_of(self, t: float, tol: float = GRID_TOL) -> int:
        return snap_index(self.points, t, tol, "time")


@dataclass(frozen=True)
class MaturityGrid:
    """Strictly increasing maturities inside [0, t_star]."""

    points: np.ndarray
    t_star: float = field(default=float("nan"))

    def __post_init__(self):
        arr = _validated_points(self.points, "maturity grid")
        t_star = self.t_star
        if np.isnan(t_star):
            t_star = float(arr[-1])
        if arr[0] < 0.0 or arr[-1] > t_star + GRID_TOL:
            raise ValueError("maturities must lie inside [0, t_star]")
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "t_star", float(t_star))

    @property
    def n_points(self) -> int:
        return self.points.size

    def index_of(self, x: float, tol: float = GRID_TOL) -> int:
        return snap_index(self.points, x, tol, "maturity")

    def nearest_index(self, x: float) -> int:
        return int(np.argmin(np.abs(self.points - x)))


def _stream_key(seed: int, stream: int, block: int) -> int:
    # 128-bit Philox key: seed in the high word, (stream, block) low.
    return ((seed & 0xFFFFFFFFFFFFFFFF) << 64) | ((stream & 0xFFFFFFFF) << 32) | (block & 0xFFFFFFFF)


@dataclass(frozen=True)
class ScenarioSet:
    """A fixed count of scenarios fed by counter-based random streams.

    Draws are produced block by block (fixed width ``SCENARIO_BLOCK``).
    Block ``b`` of stream ``s`` is generated by a Philox engine keyed on
    (seed, s, b), so any consumer can regenerate any block in isolation
    and obtain the same bits as a whole-run pass.
    """

    count: int
    seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("no scenarios")
        if not 0 <= self.seed < 2**63:
            raise ValueError("seed must be a non-negative 63-bit integer")

    @property
    def n_blocks(self) -> int:
        return -(-self.count // SCENARIO_BLOCK)

    def block_slices(self):
        for b in range(self.n_blocks):
            lo = b * SCENARIO_BLOCK
            yield b, slice(lo, min(lo + SCENARIO_BLOCK, self.count))

    def subset(self, sl: slice) -> "ScenarioSet":
        n = sl.stop - sl.start
        return ScenarioSet(count=n, seed=self.seed)

    def block_uniforms(self, stream: int, block: int, cols: int) -> np.ndarray:
        """Uniforms in (0, 1), shape (block width, cols)."""
        lo = block * SCENARIO_BLOCK
        width = min(SCENARIO_BLOCK, self.count - lo)
        if width <= 0:
            raise ValueError("block index out of range")
        gen = Generator(Philox(key=_stream_key(self.seed, stream, block)))
        u = gen.random((width, cols))
        # random() returns k / 2^53; shifting by 2^-54 is exact and keeps
        # the draw strictly inside (0, 1) for inverse-CDF transforms.
        return u + 2.0**-54

    def uniforms(self, stream: int, cols: int) -> np.ndarray:
        parts = [self.block_uniforms(stream, b, cols) for b in range(self.n_blocks)]
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)

    def block_normals(self, stream: int, block: int, cols: int) -> np.ndarray:
        return ndtri(self.block_uniforms(stream, block, cols))

    def normals(self, stream: int, cols: int) -> np.ndarray:
        return ndtri(self.uniforms(stream, cols))

    def block_exponentials(self, stream: int, block: int, means: np.ndarray) -> np.ndarray:
        """Exponential draws by inverse CDF, one column per entry of ``means``."""
        means = np.asarray(means, dtype=np.float64)
        u = self.block_uniforms(stream, block, means.size)
        return -means[None, :] * np.log1p(-u)

    def exponentials(self, stream: int, means: np.ndarray) -> np.ndarray:
        parts = [self.block_exponentials(stream, b, means) for b in range(self.n_blocks)]
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)
