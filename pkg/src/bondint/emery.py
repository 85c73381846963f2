"""Seminorms and a dictionary proxy for the semimartingale topology.

The distance that matters for generalized integrands is the one induced
by E[1 ^ sup_t |(h . Y)_t|] over predictable |h| <= 1.  Searching all
controls is hopeless, so ``emery_proxy`` evaluates a small dictionary of
adversarial controls and reports the largest capped statistic.  That
gives a certified lower bound of the true quasinorm; the constant
control is always kept in the dictionary so the bound is never weaker
than the plain capped supremum of the increments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import GRID_TOL, STREAM_CONTROL_SIGNS, ScenarioSet
from .paths import FamilyPaths, PredictableSet, ProcessPaths

__all__ = [
    "Control",
    "ConstantControl",
    "PreviousIncrementSign",
    "RunningIntegralSign",
    "RandomSigns",
    "default_dictionary",
    "sup_seminorm",
    "emery_proxy",
    "emery_distance_proxy",
    "check_negligible",
    "continuity_profile",
    "NegligibleReport",
]

_CONTROL_TOL = 1e-12


class Control:
    """Predictable control builder: |weights| <= 1, weights at step k may
    only depend on the path up to and including t_k."""

    name = "control"

    def weights(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantControl(Control):
    def __init__(self, c: float = 1.0):
        if abs(c) > 1.0:
            raise ValueError("control not admissible: |c| exceeds 1")
        self.c = float(c)
        self.name = f"const{self.c:+g}"

    def weights(self, values):
        n_scen, n_pts = values.shape
        return np.full((n_scen, n_pts - 1), self.c)


class PreviousIncrementSign(Control):
    """h_0 = +1, h_k = sign of the previous increment (0 maps to +1)."""

    name = "prev-sign"

    def weights(self, values):
        d = values[:, 1:] - values[:, :-1]
        h = np.empty_like(d)
        h[:, 0] = 1.0
        h[:, 1:] = np.where(d[:, :-1] >= 0.0, 1.0, -1.0)
        return h


class RunningIntegralSign(Control):
    """Greedy push of the running integral away from zero."""

    name = "running-sign"

    def weights(self, values):
        d = np.ascontiguousarray(values[:, 1:] - values[:, :-1])
        return _kernels.running_sign_weights(d)


class RandomSigns(Control):
    """Pre-generated +-1 path, independent of the integrand (hence
    predictable for any filtration carrying it)."""

    def __init__(self, index: int, seed: int = 777):
        self.index = int(index)
        self.seed = int(seed)
        self.name = f"random-signs-{self.index}"

    def weights(self, values):
        n_scen, n_pts = values.shape
        scen = ScenarioSet(count=n_scen, seed=self.seed + 1000003 * self.index)
        u = scen.uniforms(STREAM_CONTROL_SIGNS, n_pts - 1)
        return np.where(u < 0.5, -1.0, 1.0)


def default_dictionary(n_random: int = 8, seed: int = 777) -> list:
    controls: list[Control] = [
        ConstantControl(1.0),
        ConstantControl(-1.0),
        PreviousIncrementSign(),
        RunningIntegralSign(),
    ]
    controls.extend(RandomSigns(i, seed=seed) for i in range(n_random))
    return controls


def sup_seminorm(paths: ProcessPaths, stop_index: int | None = None) -> float:
    """Monte Carlo estimate of E[sup_{n <= stop} Y_n^2]^(1/2)."""
    vals = paths.values if stop_index is None else paths.values[:, : stop_index + 1]
    if vals.shape[1] == 0:
        raise ValueError("stop index out of range")
    return float(np.sqrt(np.mean(np.max(vals * vals, axis=1))))


def _capped_stat(values: np.ndarray, h: np.ndarray) -> float:
    if np.any(np.abs(h) > 1.0 + _CONTROL_TOL):
        raise ValueError("control not admissible: |h| exceeds 1")
    contrib = np.ascontiguousarray(h * (values[:, 1:] - values[:, :-1]))
    return float(np.mean(_kernels.capped_sup_stat(contrib)))


def emery_proxy(paths: ProcessPaths, dictionary: list | None = None) -> float:
    """Largest capped statistic over the control dictionary.

    The constant control h = 1 is appended when missing, so the proxy is
    always at least the capped supremum of the raw integral.
    """
    controls = list(dictionary) if dictionary is not None else default_dictionary()
    if not any(isinstance(c, ConstantControl) and c.c == 1.0 for c in controls):
        controls.insert(0, ConstantControl(1.0))
    vals = paths.values
    return max(_capped_stat(vals, c.weights(vals)) for c in controls)


def emery_distance_proxy(a: ProcessPaths, b: ProcessPaths, dictionary: list | None = None) -> float:
    if not np.array_equal(a.time_grid.points, b.time_grid.points):
        raise ValueError("time grids differ")
    if a.n_scenarios != b.n_scenarios:
        raise ValueError("scenario counts differ")
    return emery_proxy(a - b, dictionary)


@dataclass(frozen=True)
class NegligibleReport:
    ok: bool
    n_violations: int
    worst: float
    examples: tuple

    def __bool__(self):
        return self.ok


def check_negligible(pred_set: PredictableSet, family: FamilyPaths, tol: float = 1e-12) -> NegligibleReport:
    """True when every family increment over a flagged step is below tol.

    Checks |S^x_{t_{n+1}} - S^x_{t_n}| <= tol for all maturities on steps
    where the indicator is set; violations are reported as (scenario,
    step, maturity index) triples (first ten).
    """
    if not np.array_equal(pred_set.time_grid.points, family.time_grid.points):
        raise ValueError("time grids differ")
    if pred_set.indicator.shape[0] != family.n_scenarios:
        raise ValueError("scenario counts differ")
    d = np.abs(family.values[:, 1:, :] - family.values[:, :-1, :])
    bad = (d > tol) & pred_set.indicator[:, :, None]
    n_bad = int(np.count_nonzero(bad))
    if n_bad == 0:
        return NegligibleReport(True, 0, 0.0, ())
    idx = np.argwhere(bad)
    worst = float(np.max(d[bad]))
    return NegligibleReport(False, n_bad, worst, tuple(map(tuple, idx[:10])))


def continuity_profile(
    family: FamilyPaths,
    x: float,
    offsets,
    dictionary: list | None = None,
    tol: float = GRID_TOL,
) -> list[tuple[float, float]]:
    """Proxy distance between S^{x+dx} and S^x for each offset dx.

    Both maturities are snapped to the nearest grid node; a snap farther
    than ``tol`` raises a warning but proceeds.  Offsets leaving the
    maturity range are an error.
    """
    pts = family.maturity_grid.points
    lo, hi = pts[0], pts[-1]

    def snapped(y: float) -> int:
        if y < lo - tol or y > hi + tol:
            raise ValueError(f"maturity {y!r} outside the family range [{lo!r}, {hi!r}]")
        m = family.maturity_grid.nearest_index(y)
        if abs(pts[m] - y) > tol:
            warnings.warn(f"maturity {y!r} snapped to grid node {pts[m]!r}", stacklevel=3)
        return m

    base = snapped(x)
    out = []
    for dx in offsets:
        other = snapped(x + float(dx))
        diff = ProcessPaths(family.values[:, :, other] - family.values[:, :, base], family.time_grid)
        out.append((float(dx), emery_proxy(diff, dictionary)))
    return out
