"""Signed measures over maturities and measure-valued simple processes.

A measure is carried on a maturity grid as atoms plus an optional
piecewise-constant density (one value per grid cell, interpreted as
density times cell width for mass purposes).  The two operations that
matter are the pairing with a maturity curve and the Dirac-combination
approximation with a certified total-variation bound; the process
integral reduces the atomic part to an equivalent simple strategy so
the equality with direct bond bookkeeping is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GRID_TOL, MaturityGrid, TimeGrid, snap_index
from .integration import (
    ConstWeight,
    GeneralizedStrategy,
    Leg,
    SimpleStrategy,
    TableWeight,
    integrate_simple,
    register_strategy,
)
from .paths import FamilyPaths, ProcessPaths

__all__ = [
    "SignedMeasureGrid",
    "uniform_density_measure",
    "exponential_tilt_measure",
    "total_variation",
    "pair_measure_curve",
    "dirac_approximate",
    "dirac_pairing_bound",
    "MeasurePiece",
    "MeasureSimpleProcess",
    "equivalent_simple_strategy",
    "integrate_measure_process",
]

_TV_SHRINK = 1.0 - 2.0**-50


@dataclass(frozen=True)
class SignedMeasureGrid:
    """Finite signed measure on a maturity interval.

    atoms: tuple of (position, weight); density: per-cell values over
    ``grid`` (len = n_points - 1) or None.  Cell j carries mass
    density[j] * (grid[j+1] - grid[j]).
    """

    grid: MaturityGrid
    atoms: tuple = ()
    density: np.ndarray | None = None

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        lo, hi = self.grid.points[0], self.grid.points[-1]
        for x, w in atoms:
            if not (lo - GRID_TOL <= x <= hi + GRID_TOL):
                raise ValueError(f"atom at {x} off the maturity interval [{lo}, {hi}]")
            if not np.isfinite(w):
                raise ValueError("atom weight must be finite")
        object.__setattr__(self, "atoms", atoms)
        if self.density is not None:
            d = np.ascontiguousarray(self.density, dtype=np.float64)
            if d.shape != (self.grid.n_points - 1,):
                raise ValueError(
                    f"density needs one value per cell ({self.grid.n_points - 1}), got {d.shape}"
                )
            if not np.all(np.isfinite(d)):
                raise ValueError("density must be finite")
            d.setflags(write=False)
            object.__setattr__(self, "density", d)

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.grid.points)

    @property
    def cell_masses(self) -> np.ndarray:
        if self.density is None:
            return np.zeros(self.grid.n_points - 1)
        return self.density * self.cell_widths

    def is_zero(self) -> bool:
        return all(w == 0.0 for _, w in self.atoms) and (
            self.density is None or not np.any(self.density)
        )


def uniform_density_measure(grid: MaturityGrid, total_mass: float = 1.0) -> SignedMeasureGrid:
    span = grid.points[-1] - grid.points[0]
    if span <= 0.0:
        raise ValueError("degenerate maturity interval")
    dens = np.full(grid.n_points - 1, total_mass / span)
    return SignedMeasureGrid(grid, (), dens)


def exponential_tilt_measure(grid: MaturityGrid, rate: float, total_mass: float = 1.0) -> SignedMeasureGrid:
    """Density proportional to exp(-rate * x), normalized to total_mass."""
    mids = 0.5 * (grid.points[:-1] + grid.points[1:])
    dens = np.exp(-rate * mids)
    norm = float(dens @ np.diff(grid.points))
    return SignedMeasureGrid(grid, (), dens * (total_mass / norm))


def total_variation(m: SignedMeasureGrid) -> float:
    """Sum of absolute atom weights and absolute cell masses."""
    return math.fsum(
        [abs(w) for _, w in m.atoms] + [abs(v) for v in m.cell_masses]
    )


def _density_point_weights(m: SignedMeasureGrid) -> np.ndarray:
    """Midpoint-rule rendering of the density as weights on grid points:
    each cell's mass splits evenly over its two endpoints (a curve given
    by grid values enters linearly, so this equals mass times the
    midpoint of the interpolated curve)."""
    v = np.zeros(m.grid.n_points)
    if m.density is not None:
        masses = m.cell_masses
        v[:-1] += 0.5 * masses
        v[1:] += 0.5 * masses
    return v


def _curve_at(m: SignedMeasureGrid, f, x: float) -> float:
    if callable(f):
        return float(f(x))
    pts = m.grid.points
    vals = np.asarray(f, dtype=np.float64)
    if vals.shape != pts.shape:
        raise ValueError("curve array must match the maturity grid")
    j = int(np.searchsorted(pts, x, side="right")) - 1
    j = min(max(j, 0), pts.size - 2)
    if abs(pts[j] - x) <= GRID_TOL:
        return float(vals[j])
    if abs(pts[j + 1] - x) <= GRID_TOL:
        return float(vals[j + 1])
    w = (x - pts[j]) / (pts[j + 1] - pts[j])
    return float((1.0 - w) * vals[j] + w * vals[j + 1])


def pair_measure_curve(m: SignedMeasureGrid, f) -> float:
    """Pairing of the measure with a curve over maturities.

    ``f`` is a callable or an array over the measure's grid points.
    Atoms contribute weight times curve value; the density contributes
    cell mass times the curve at the cell midpoint (for array curves the
    grid-linear rendering, applied via the shared point-weight vector so
    the process integral uses identical arithmetic).
    """
    atom_terms = [w * _curve_at(m, f, x) for x, w in m.atoms]
    total = math.fsum(atom_terms)
    if m.density is None:
        return total
    if callable(f):
        mids = 0.5 * (m.grid.points[:-1] + m.grid.points[1:])
        dens_term = math.fsum(
            mass * float(f(mid)) for mass, mid in zip(m.cell_masses, mids)
        )
    else:
        dens_term = float(_density_point_weights(m) @ np.asarray(f, dtype=np.float64))
    return total + dens_term


# ---------------------------------------------------------------------------
# Dirac approximation


def _elements(m: SignedMeasureGrid):
    """Measure as position-ordered elements: ('atom', x, w) and
    ('cell', a, b, density)."""
    els = []
    for x, w in m.atoms:
        if w != 0.0:
            els.append(("atom", x, x, w))
    if m.density is not None:
        pts = m.grid.points
        for j, d in enumerate(m.density):
            if d != 0.0:
                els.append(("cell", float(pts[j]), float(pts[j + 1]), float(d)))
    els.sort(key=lambda e: (e[1], e[2]))
    return els


def _element_abs_mass(e) -> float:
    kind, a, b, v = e
    return abs(v) if kind == "atom" else abs(v) * (b - a)


def _lump(els, target: float):
    """Walk elements left to right, cutting at equal-|mass| quantiles;
    lump each cell's signed mass at per-sign barycenters.  Returns the
    atoms and the widest cell extent (for the pairing certificate)."""
    atoms = []
    max_extent = 0.0
    acc = {1.0: 0.0, -1.0: 0.0}     # |mass| per sign in current cell
    mom = {1.0: 0.0, -1.0: 0.0}     # |mass|-weighted positions
    filled = 0.0
    span = [np.inf, -np.inf]

    def flush():
        nonlocal filled, max_extent
        if acc[1.0] > 0.0:
            atoms.append((mom[1.0] / acc[1.0], acc[1.0]))
        if acc[-1.0] > 0.0:
            atoms.append((mom[-1.0] / acc[-1.0], -acc[-1.0]))
        if filled > 0.0:
            max_extent = max(max_extent, span[1] - span[0])
        acc[1.0] = acc[-1.0] = mom[1.0] = mom[-1.0] = 0.0
        filled = 0.0
        span[0], span[1] = np.inf, -np.inf

    def add(amount, position, sign, lo, hi):
        nonlocal filled
        s = 1.0 if sign >= 0.0 else -1.0
        acc[s] += amount
        mom[s] += amount * position
        filled += amount
        span[0] = min(span[0], lo)
        span[1] = max(span[1], hi)

    for kind, a, b, v in els:
        if kind == "atom":
            add(abs(v), a, v, a, a)
            if filled >= target * (1.0 - 1e-12):
                flush()
            continue
        left = a
        remaining = abs(v) * (b - a)
        while remaining > 0.0:
            room = target - filled
            if room <= 0.0:
                flush()
                room = target
            take = min(remaining, room)
            right = min(left + take / abs(v), b)
            add(take, 0.5 * (left + right), v, left, right)
            left = right
            remaining -= take
            if filled >= target * (1.0 - 1e-12):
                flush()
    flush()
    return atoms, max_extent


def dirac_approximate(m: SignedMeasureGrid, n: int) -> SignedMeasureGrid:
    """Approximate by at most 2n Dirac atoms without increasing total
    variation.

    The support is split into n cells of equal absolute mass; each cell
    lumps its signed mass at the absolute-mass barycenter, one atom per
    sign present.  A purely atomic measure with at most n atoms is
    returned unchanged.  Atom positions never leave the original support
    and the returned total variation is clamped to never exceed the
    input's.
    """
    if n < 1:
        raise ValueError("atom budget must be >= 1")
    if m.is_zero():
        return SignedMeasureGrid(m.grid, (), None)
    if (m.density is None or not np.any(m.density)) and len(m.atoms) <= n:
        return m

    els = _elements(m)
    total = math.fsum(_element_abs_mass(e) for e in els)
    new_atoms, _ = _lump(els, total / n)

    # clamp: floating accumulation must never report more variation
    tv_in = total_variation(m)
    atoms = new_atoms
    while math.fsum(abs(w) for _, w in atoms) > tv_in:
        atoms = [(x, w * _TV_SHRINK) for x, w in atoms]
    return SignedMeasureGrid(m.grid, tuple(atoms), None)


def dirac_pairing_bound(m: SignedMeasureGrid, n: int, lipschitz: float) -> float:
    """Certified pairing-error bound: Lipschitz constant times the widest
    lumping cell the n-atom approximation actually used (atoms lumped at
    barycenters move mass at most one cell extent)."""
    if n < 1:
        raise ValueError("atom budget must be >= 1")
    if m.is_zero():
        return 0.0
    if (m.density is None or not np.any(m.density)) and len(m.atoms) <= n:
        return 0.0
    els = _elements(m)
    total = math.fsum(_element_abs_mass(e) for e in els)
    _, max_extent = _lump(els, total / n)
    return lipschitz * max_extent


# ---------------------------------------------------------------------------
# measure-valued simple processes


@dataclass(frozen=True)
class MeasurePiece:
    """One elementary piece: measure held on (t_start, t_end] on the
    event given by ``indicator`` (None means all scenarios).  The
    indicator must be determined by history up to t_start; builders that
    construct it from a family prefix keep that structural."""

    measure: SignedMeasureGrid
    t_start: float
    t_end: float
    indicator: np.ndarray | None = None

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("piece interval must have t_end > t_start")
        if self.indicator is not None:
            ind = np.ascontiguousarray(self.indicator, dtype=bool)
            ind.setflags(write=False)
            object.__setattr__(self, "indicator", ind)


@dataclass(frozen=True)
class MeasureSimpleProcess:
    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for p in pieces:
            if not isinstance(p, MeasurePiece):
                raise TypeError("pieces must be MeasurePiece instances")
        for p, q in zip(pieces, pieces[1:]):
            if q.t_start < p.t_end - GRID_TOL:
                raise ValueError("piece intervals must be ordered and non-overlapping")
        object.__setattr__(self, "pieces", pieces)


def _piece_span(p: MeasurePiece, time_grid: TimeGrid):
    i0 = snap_index(time_grid.points, p.t_start, GRID_TOL, "piece endpoint")
    i1 = snap_index(time_grid.points, p.t_end, GRID_TOL, "piece endpoint")
    return i0, i1


def equivalent_simple_strategy(phi: MeasureSimpleProcess, family: FamilyPaths) -> SimpleStrategy:
    """Simple strategy whose bond legs replicate the atomic parts of all
    pieces: one leg per (piece, atom) with the atom weight switched on
    over the piece's steps and gated by the piece event."""
    n_steps = family.time_grid.n_points - 1
    legs = []
    for p in phi.pieces:
        i0, i1 = _piece_span(p, family.time_grid)
        for x, w in p.measure.atoms:
            gate = np.zeros(n_steps)
            gate[i0:i1] = w
            if p.indicator is None:
                legs.append(Leg(x, TableWeight(gate)))
            else:
                legs.append(Leg(x, TableWeight(p.indicator[:, None] * gate[None, :])))
    return SimpleStrategy(tuple(legs))


def integrate_measure_process(phi: MeasureSimpleProcess, family: FamilyPaths) -> ProcessPaths:
    """Integral of a measure-valued simple process.

    Atomic parts are integrated through the equivalent simple strategy
    (the identical accumulation path, so purely atomic processes agree
    with direct bond bookkeeping bit for bit); density parts add the
    pairing of each piece measure with the clamped price slices.
    """
    out = integrate_simple(equivalent_simple_strategy(phi, family), family)
    has_density = any(
        p.measure.density is not None and np.any(p.measure.density) for p in phi.pieces
    )
    if not has_density:
        return out
    vals = out.values.copy()
    n_pts = family.time_grid.n_points
    idx = np.arange(n_pts)
    for p in phi.pieces:
        if p.measure.density is None or not np.any(p.measure.density):
            continue
        if p.measure.grid.n_points != family.maturity_grid.n_points or not np.allclose(
            p.measure.grid.points, family.maturity_grid.points, atol=GRID_TOL, rtol=0.0
        ):
            raise ValueError("density measure must live on the family's maturity grid")
        i0, i1 = _piece_span(p, family.time_grid)
        v = _density_point_weights(p.measure)
        paired = family.values @ v
        delta = paired[:, np.minimum(idx, i1)] - paired[:, np.minimum(idx, i0)]
        if p.indicator is not None:
            delta = delta * p.indicator[:, None]
        vals += delta
    return ProcessPaths(vals, family.time_grid)


# ---------------------------------------------------------------------------
# named construction for the generalized-strategy registry


def _make_measure_approximation(measure: SignedMeasureGrid, family_grid: MaturityGrid) -> GeneralizedStrategy:
    """Constant-in-time generalized strategy whose approximants hold the
    n-atom Dirac approximation of ``measure``, atom positions snapped to
    the family grid; the evaluator is the true measure pairing."""

    def approximant(n: int) -> SimpleStrategy:
        approx = dirac_approximate(measure, n)
        legs = []
        for x, w in approx.atoms:
            snapped = family_grid.points[family_grid.nearest_index(x)]
            legs.append(Leg(float(snapped), ConstWeight(w)))
        return SimpleStrategy(tuple(legs))

    def evaluator(prefix, f):
        return pair_measure_curve(measure, f)

    return GeneralizedStrategy("measure-approximation", approximant, evaluator)


register_strategy("measure-approximation", _make_measure_approximation)
